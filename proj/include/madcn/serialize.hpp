#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "madcn/errors.hpp"
#include "madcn/model.hpp"

namespace madcn {

// Container layout shared by every model family:
//   magic (5 bytes) | version (1 byte) | header length (8 bytes LE)
//   | JSON header | payload of little-endian 64-bit floats, row-major,
//   in manifest order. The manifest in the header records name, shape and
//   byte offset (relative to payload start) of each tensor.
inline constexpr char kMadcnMagic[] = "MADCN";
inline constexpr char kLinearMagic[] = "LINR1";
inline constexpr char kKnnMagic[] = "KNNR1";
inline constexpr std::uint8_t kFormatVersion = 1;

namespace detail {

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64_le(std::istream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw format_error("truncated file: unexpected end of data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

inline void write_doubles_le(std::ostream& out, std::span<const double> values) {
    for (double d : values) {
        write_u64_le(out, std::bit_cast<std::uint64_t>(d));
    }
}

inline void read_doubles_le(std::istream& in, std::span<double> values) {
    for (auto& d : values) {
        d = std::bit_cast<double>(read_u64_le(in));
    }
}

inline void check_magic_version(std::istream& in, const char* magic, const std::string& path) {
    char got[5];
    in.read(got, 5);
    if (!in || std::memcmp(got, magic, 5) != 0) {
        throw format_error("file " + path + " does not start with magic \"" + magic + "\"");
    }
    char version = 0;
    in.read(&version, 1);
    if (!in) throw format_error("truncated file: " + path);
    if (static_cast<std::uint8_t>(version) != kFormatVersion) {
        throw format_error("file " + path + " has unsupported format version " +
                           std::to_string(static_cast<int>(version)) + " (supported: " +
                           std::to_string(static_cast<int>(kFormatVersion)) + ")");
    }
}

inline nlohmann::json read_header(std::istream& in, const std::string& path) {
    std::uint64_t len = read_u64_le(in);
    std::string raw(len, '\0');
    in.read(raw.data(), static_cast<std::streamsize>(len));
    if (!in) throw format_error("truncated file: " + path);
    try {
        return nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception& e) {
        throw format_error("file " + path + " has a malformed header: " + e.what());
    }
}

inline nlohmann::json standardizer_to_json(const StandardizerStats& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : s.fields) {
        arr.push_back({{"mu", f.mu}, {"sigma", f.sigma}, {"constant", f.constant}});
    }
    return arr;
}

inline StandardizerStats standardizer_from_json(const nlohmann::json& j) {
    StandardizerStats s;
    for (const auto& f : j) {
        s.fields.push_back({f.at("mu").get<double>(), f.at("sigma").get<double>(),
                            f.at("constant").get<bool>()});
    }
    return s;
}

template <typename PS>
nlohmann::json manifest_of(PS& ps) {
    nlohmann::json manifest = nlohmann::json::array();
    std::size_t offset = 0;
    visit_params(ps, [&](const std::string& name, auto v, std::size_t rows, std::size_t cols) {
        manifest.push_back(
            {{"name", name}, {"rows", rows}, {"cols", cols}, {"offset", offset}});
        offset += v.size() * sizeof(double);
    });
    return manifest;
}

} // namespace detail

inline void save_model(const MadcnModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path);

    nlohmann::json header;
    header["schema"] = schema_to_json(model.schema);
    header["category_maps"] = model.category_maps;
    header["standardizer"] = detail::standardizer_to_json(model.standardizer);
    header["seed"] = model.seed;
    const auto& h = model.hyper;
    header["hyper"] = {{"embed_dim", h.embed_dim},
                       {"cross_layers", h.cross_layers},
                       {"deep_layers", h.deep_layers},
                       {"heads", h.heads},
                       {"d_model", h.d_model},
                       {"d_k", h.d_k},
                       {"use_cross", h.use_cross},
                       {"use_deep", h.use_deep},
                       {"use_attention", h.use_attention},
                       {"noise", {{"mu", h.noise.mu},
                                  {"sigma", h.noise.sigma},
                                  {"train_only", h.noise.train_only}}}};
    const ParamSet& ps = model.params;
    header["manifest"] = detail::manifest_of(ps);

    std::string header_str = header.dump();
    out.write(kMadcnMagic, 5);
    char version = static_cast<char>(kFormatVersion);
    out.write(&version, 1);
    detail::write_u64_le(out, header_str.size());
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    visit_params(ps, [&](const std::string&, auto v, std::size_t, std::size_t) {
        detail::write_doubles_le(out, v);
    });
    if (!out) throw io_error("write failed: " + path);
}

inline MadcnModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file: " + path);
    detail::check_magic_version(in, kMadcnMagic, path);
    nlohmann::json header = detail::read_header(in, path);

    MadcnModel model;
    try {
        model.schema = schema_from_json(header.at("schema"));
        model.category_maps = header.at("category_maps").get<CategoryMaps>();
        model.standardizer = detail::standardizer_from_json(header.at("standardizer"));
        model.seed = header.at("seed").get<std::uint64_t>();
        const auto& h = header.at("hyper");
        model.hyper.embed_dim = h.at("embed_dim").get<std::size_t>();
        model.hyper.cross_layers = h.at("cross_layers").get<std::size_t>();
        model.hyper.deep_layers = h.at("deep_layers").get<std::vector<std::size_t>>();
        model.hyper.heads = h.at("heads").get<std::size_t>();
        model.hyper.d_model = h.at("d_model").get<std::size_t>();
        model.hyper.d_k = h.at("d_k").get<std::size_t>();
        model.hyper.use_cross = h.at("use_cross").get<bool>();
        model.hyper.use_deep = h.at("use_deep").get<bool>();
        model.hyper.use_attention = h.at("use_attention").get<bool>();
        model.hyper.noise.mu = h.at("noise").at("mu").get<double>();
        model.hyper.noise.sigma = h.at("noise").at("sigma").get<double>();
        model.hyper.noise.train_only = h.at("noise").at("train_only").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error("file " + path + " header misses fields: " + e.what());
    }

    // rebuild tensors, then overwrite from payload in manifest order
    MadcnModel built = MadcnModel::build(model.schema, model.category_maps, model.standardizer,
                                         model.hyper, model.seed);
    nlohmann::json expected = detail::manifest_of(built.params);
    if (expected != header.at("manifest")) {
        throw format_error("file " + path + " manifest does not match its hyperparameters");
    }
    visit_params(built.params,
                 [&](const std::string&, std::span<double> v, std::size_t, std::size_t) {
                     detail::read_doubles_le(in, v);
                 });
    if (!in) throw format_error("truncated file: " + path);
    return built;
}

} // namespace madcn
