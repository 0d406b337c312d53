#include "skelpaint/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "skelpaint/errors.hpp"

namespace skelpaint {

namespace {

constexpr char kMagic[4] = {'S', 'K', 'L', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw MalformedFile(path + ": truncated checkpoint");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw MalformedFile(path + ": truncated checkpoint");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in, const std::string& path) {
    uint64_t bits = get_u64(in, path);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string encode_header(const std::map<std::string, std::string>& header) {
    std::string out;
    for (const auto& [k, v] : header) out += k + " = " + v + "\n";
    return out;
}

std::map<std::string, std::string> decode_header(const std::string& text, const std::string& path) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t eq = line.find(" = ");
        if (eq == std::string::npos) throw MalformedFile(path + ": bad header line '" + line + "'");
        out[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return out;
}

}  // namespace

void save_params(const std::string& path, const ParamPack& pack, const std::map<std::string, std::string>& header) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);

    out.write(kMagic, 4);
    put_u32(out, kVersion);
    std::string head = encode_header(header);
    put_u64(out, head.size());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    put_u64(out, pack.items.size());
    for (const auto& it : pack.items) {
        put_u64(out, it.name.size());
        out.write(it.name.data(), static_cast<std::streamsize>(it.name.size()));
        put_u64(out, it.value.shape.size());
        for (int64_t d : it.value.shape) put_u64(out, static_cast<uint64_t>(d));
        for (double v : it.value.data) put_f64(out, v);
    }
    if (!out) throw IoError("write failed: " + path);
}

LoadedParams load_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw MalformedFile(path + ": not a checkpoint file");
    uint32_t version = get_u32(in, path);
    if (version != kVersion) throw MalformedFile(path + ": unsupported checkpoint version " + std::to_string(version));

    uint64_t head_len = get_u64(in, path);
    std::string head(head_len, '\0');
    if (!in.read(head.data(), static_cast<std::streamsize>(head_len))) throw MalformedFile(path + ": truncated header");

    LoadedParams out;
    out.header = decode_header(head, path);
    uint64_t count = get_u64(in, path);
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t name_len = get_u64(in, path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) throw MalformedFile(path + ": truncated name");
        uint64_t ndim = get_u64(in, path);
        std::vector<int64_t> shape(ndim);
        for (auto& d : shape) d = static_cast<int64_t>(get_u64(in, path));
        int64_t numel = Tensor::numel_of(shape);
        std::vector<double> data(static_cast<size_t>(numel));
        for (auto& v : data) v = get_f64(in, path);
        out.pack.items.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
    }
    return out;
}

namespace {

int64_t header_int(const std::map<std::string, std::string>& h, const std::string& key, const std::string& path) {
    auto it = h.find(key);
    if (it == h.end()) throw MalformedFile(path + ": checkpoint header missing '" + key + "'");
    return std::stoll(it->second);
}

}  // namespace

void save_model(const std::string& path, const RepaintModel& model, const std::map<std::string, std::string>& extra) {
    std::map<std::string, std::string> header = extra;
    header["format"] = "repaint-model";
    header["scheme"] = scheme_name(model.scheme);
    header["enc.k"] = std::to_string(model.enc.k);
    std::string widths;
    for (size_t i = 0; i < model.enc.block_widths.size(); ++i) {
        if (i) widths += ",";
        widths += std::to_string(model.enc.block_widths[i]);
    }
    header["enc.block_widths"] = widths;
    header["enc.feature_dim"] = std::to_string(model.enc.feature_dim);
    std::ostringstream slope;
    slope.precision(17);
    slope << model.enc.leaky_slope;
    header["enc.leaky_slope"] = slope.str();
    header["dec.grid_side"] = std::to_string(model.dec.grid_side);
    header["dec.hidden_width"] = std::to_string(model.dec.hidden_width);
    std::ostringstream extent;
    extent.precision(17);
    extent << model.dec.grid_extent;
    header["dec.grid_extent"] = extent.str();
    save_params(path, model.params, header);
}

LoadedModel load_model(const std::string& path) {
    LoadedParams raw = load_params(path);
    auto fmt = raw.header.find("format");
    if (fmt == raw.header.end() || fmt->second != "repaint-model")
        throw MalformedFile(path + ": not a repaint-model checkpoint");

    LoadedModel out;
    out.model.scheme = scheme_from_name(raw.header.at("scheme"));
    out.model.enc.k = header_int(raw.header, "enc.k", path);
    out.model.enc.block_widths.clear();
    std::istringstream widths(raw.header.at("enc.block_widths"));
    std::string tok;
    while (std::getline(widths, tok, ',')) out.model.enc.block_widths.push_back(std::stoll(tok));
    out.model.enc.feature_dim = header_int(raw.header, "enc.feature_dim", path);
    out.model.enc.leaky_slope = std::stod(raw.header.at("enc.leaky_slope"));
    out.model.dec.grid_side = header_int(raw.header, "dec.grid_side", path);
    out.model.dec.hidden_width = header_int(raw.header, "dec.hidden_width", path);
    out.model.dec.grid_extent = std::stod(raw.header.at("dec.grid_extent"));
    out.model.params = std::move(raw.pack);

    for (const auto& [k, v] : raw.header)
        if (k.rfind("enc.", 0) != 0 && k.rfind("dec.", 0) != 0 && k != "format" && k != "scheme") out.extra[k] = v;
    return out;
}

}  // namespace skelpaint
