#pragma once
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pentrap/integrator.hpp"

// Binary trajectory container: "PTRJ" magic, u32 little-endian JSON header
// length, JSON header, packed little-endian f64 frame records
// (time, pos[3N], vel[3N], ke_par, ke_perp, pe_raw), the final integrator
// state (time, pos[3N], vel[3N]), and a trailing CRC-32 over header + payload.
// Raw doubles are written in host order; the format targets little-endian
// machines.

namespace pentrap {

namespace detail {

inline std::uint32_t crc32(const unsigned char* data, std::size_t len,
                           std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

inline const char* ramp_kind_name(RampKind k) {
    switch (k) {
        case RampKind::constant: return "constant";
        case RampKind::linear: return "linear";
        case RampKind::half_cosine: return "half_cosine";
    }
    return "?";
}

inline RampKind ramp_kind_from(const std::string& s) {
    if (s == "constant") return RampKind::constant;
    if (s == "linear") return RampKind::linear;
    if (s == "half_cosine") return RampKind::half_cosine;
    throw FormatError("unknown ramp kind: " + s);
}

inline const char* alpha_policy_name(AlphaPolicy p) {
    return p == AlphaPolicy::fixed_delta ? "fixed_delta" : "fixed_alpha";
}

inline AlphaPolicy alpha_policy_from(const std::string& s) {
    if (s == "fixed_delta") return AlphaPolicy::fixed_delta;
    if (s == "fixed_alpha") return AlphaPolicy::fixed_alpha;
    throw FormatError("unknown wall-strength policy: " + s);
}

inline nlohmann::json schedule_to_json(const WallSchedule& s) {
    return {{"kind", ramp_kind_name(s.kind)},
            {"omega_i", s.omega_i},
            {"omega_f", s.omega_f},
            {"ramp_time", s.ramp_time},
            {"policy", alpha_policy_name(s.policy)},
            {"strength", s.strength}};
}

inline WallSchedule schedule_from_json(const nlohmann::json& j) {
    WallSchedule s;
    s.kind = ramp_kind_from(j.at("kind").get<std::string>());
    s.omega_i = j.at("omega_i").get<double>();
    s.omega_f = j.at("omega_f").get<double>();
    s.ramp_time = j.at("ramp_time").get<double>();
    s.policy = alpha_policy_from(j.at("policy").get<std::string>());
    s.strength = j.at("strength").get<double>();
    return s;
}

} // namespace detail

inline void write_trajectory(const std::string& path, const Trajectory& traj) {
    const int frames = traj.frames();
    const int d = frames > 0 ? static_cast<int>(traj.pos[0].size())
                             : static_cast<int>(traj.final_state.pos.size());

    nlohmann::json header = {{"format", "PTRJ"},
                             {"schema_version", 1},
                             {"n_ions", d / 3},
                             {"frames", frames},
                             {"dt", traj.dt},
                             {"stride", traj.stride},
                             {"schedule", detail::schedule_to_json(traj.schedule)}};
    const std::string htext = header.dump();

    std::vector<double> payload;
    payload.reserve(static_cast<std::size_t>(frames) * (2 * d + 4) + 2 * d + 1);
    for (int k = 0; k < frames; ++k) {
        payload.push_back(traj.times[k]);
        payload.insert(payload.end(), traj.pos[k].data(), traj.pos[k].data() + d);
        payload.insert(payload.end(), traj.vel[k].data(), traj.vel[k].data() + d);
        payload.push_back(traj.ke_par[k]);
        payload.push_back(traj.ke_perp[k]);
        payload.push_back(traj.pe_raw[k]);
    }
    payload.push_back(traj.final_state.time);
    payload.insert(payload.end(), traj.final_state.pos.data(), traj.final_state.pos.data() + d);
    payload.insert(payload.end(), traj.final_state.vel.data(), traj.final_state.vel.data() + d);

    std::uint32_t crc =
        detail::crc32(reinterpret_cast<const unsigned char*>(htext.data()), htext.size());
    crc = detail::crc32(reinterpret_cast<const unsigned char*>(payload.data()),
                        payload.size() * sizeof(double), crc);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("write_trajectory: cannot open " + path);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    f.write("PTRJ", 4);
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(&crc), 4);
    if (!f) throw Error("write_trajectory: short write to " + path);
}

inline Trajectory read_trajectory(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("read_trajectory: cannot open " + path);
    char magic[4];
    std::uint32_t hlen = 0;
    f.read(magic, 4);
    f.read(reinterpret_cast<char*>(&hlen), 4);
    if (!f || std::memcmp(magic, "PTRJ", 4) != 0)
        throw FormatError("read_trajectory: bad magic in " + path);
    if (hlen > (1u << 20)) throw FormatError("read_trajectory: implausible header length");

    std::string htext(hlen, '\0');
    f.read(htext.data(), hlen);
    if (!f) throw FormatError("read_trajectory: truncated header");

    int n = 0, frames = 0;
    Trajectory traj;
    try {
        const nlohmann::json header = nlohmann::json::parse(htext);
        if (header.value("schema_version", -1) != 1)
            throw FormatError("read_trajectory: unsupported schema version");
        n = header.at("n_ions").get<int>();
        frames = header.at("frames").get<int>();
        traj.dt = header.at("dt").get<double>();
        traj.stride = header.at("stride").get<int>();
        traj.schedule = detail::schedule_from_json(header.at("schedule"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("read_trajectory: header parse failure: ") + e.what());
    }
    if (n < 1 || frames < 0) throw FormatError("read_trajectory: implausible header counts");
    const int d = 3 * n;

    const std::size_t count = static_cast<std::size_t>(frames) * (2 * d + 4) + 2 * d + 1;
    std::vector<double> payload(count);
    f.read(reinterpret_cast<char*>(payload.data()),
           static_cast<std::streamsize>(count * sizeof(double)));
    std::uint32_t crc_stored = 0;
    f.read(reinterpret_cast<char*>(&crc_stored), 4);
    if (!f) throw FormatError("read_trajectory: truncated payload");

    std::uint32_t crc =
        detail::crc32(reinterpret_cast<const unsigned char*>(htext.data()), htext.size());
    crc = detail::crc32(reinterpret_cast<const unsigned char*>(payload.data()),
                        count * sizeof(double), crc);
    if (crc != crc_stored) throw FormatError("read_trajectory: checksum mismatch");

    std::size_t off = 0;
    for (int k = 0; k < frames; ++k) {
        traj.times.push_back(payload[off++]);
        traj.pos.emplace_back(Eigen::Map<Eigen::VectorXd>(payload.data() + off, d));
        off += d;
        traj.vel.emplace_back(Eigen::Map<Eigen::VectorXd>(payload.data() + off, d));
        off += d;
        traj.ke_par.push_back(payload[off++]);
        traj.ke_perp.push_back(payload[off++]);
        traj.pe_raw.push_back(payload[off++]);
    }
    traj.final_state.time = payload[off++];
    traj.final_state.pos = Eigen::Map<Eigen::VectorXd>(payload.data() + off, d);
    off += d;
    traj.final_state.vel = Eigen::Map<Eigen::VectorXd>(payload.data() + off, d);
    traj.final_state.frame = Frame::lab;
    return traj;
}

} // namespace pentrap
