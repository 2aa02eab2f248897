#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prism/optim.hpp"

namespace prism {

// Checkpoint layout:
//   [u64 LE manifest length][manifest JSON, UTF-8][payload: f64 LE values]
// Manifest entries give (name, rows, cols, offset) with offset counted in
// 64-bit elements from the start of the payload. Round-trips bit-exactly.
inline void save_checkpoint(const Parameters& params, const std::string& path) {
    nlohmann::json manifest;
    manifest["format"] = "prism-ckpt-v1";
    manifest["params"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& p : params.items()) {
        manifest["params"].push_back(
            {{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"offset", offset}});
        offset += p.value.size();
    }
    const std::string mtxt = manifest.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    std::uint64_t mlen = mtxt.size();
    unsigned char hdr[8];
    for (int i = 0; i < 8; ++i) hdr[i] = static_cast<unsigned char>((mlen >> (8 * i)) & 0xff);
    f.write(reinterpret_cast<const char*>(hdr), 8);
    f.write(mtxt.data(), static_cast<std::streamsize>(mtxt.size()));
    for (const auto& p : params.items()) {
        for (double d : p.value) {
            std::uint64_t bits;
            std::memcpy(&bits, &d, 8);
            unsigned char buf[8];
            for (int i = 0; i < 8; ++i)
                buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
            f.write(reinterpret_cast<const char*>(buf), 8);
        }
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline Parameters load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    unsigned char hdr[8];
    f.read(reinterpret_cast<char*>(hdr), 8);
    if (!f) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    std::uint64_t mlen = 0;
    for (int i = 0; i < 8; ++i) mlen |= static_cast<std::uint64_t>(hdr[i]) << (8 * i);
    std::string mtxt(mlen, '\0');
    f.read(mtxt.data(), static_cast<std::streamsize>(mlen));
    if (!f) throw std::runtime_error("load_checkpoint: truncated manifest in " + path);
    nlohmann::json manifest = nlohmann::json::parse(mtxt);
    if (manifest.value("format", "") != "prism-ckpt-v1")
        throw std::runtime_error("load_checkpoint: unrecognized format in " + path);

    std::vector<double> payload;
    {
        std::vector<char> raw((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
        if (raw.size() % 8 != 0)
            throw std::runtime_error("load_checkpoint: payload not a multiple of 8 bytes");
        payload.resize(raw.size() / 8);
        for (std::size_t k = 0; k < payload.size(); ++k) {
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i)
                bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * k + i]))
                        << (8 * i);
            std::memcpy(&payload[k], &bits, 8);
        }
    }

    Parameters params;
    for (const auto& e : manifest["params"]) {
        const std::string name = e.at("name").get<std::string>();
        const int rows = e.at("rows").get<int>();
        const int cols = e.at("cols").get<int>();
        const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
        Param& p = params.add(name, rows, cols);
        if (offset + p.value.size() > payload.size())
            throw std::runtime_error("load_checkpoint: payload too short for " + name);
        std::copy(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                  payload.begin() + static_cast<std::ptrdiff_t>(offset + p.value.size()),
                  p.value.begin());
    }
    return params;
}

}  // namespace prism
