#include "xdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "xdiff/errors.hpp"

namespace xdiff {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double d) {
    uint64_t v = std::bit_cast<uint64_t>(d);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& is, const std::string& path) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw IoError("truncated checkpoint: " + path);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8))
        throw IoError("truncated checkpoint: " + path);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

}  // namespace

void save_net(const FeedForwardNet& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kNetMagic, 8);
    put_u32(os, kNetFormatVersion);
    put_u32(os, static_cast<uint32_t>(net.layers.size()));
    for (const Layer& l : net.layers) {
        put_u32(os, static_cast<uint32_t>(l.fan_in()));
        put_u32(os, static_cast<uint32_t>(l.fan_out()));
        put_u32(os, static_cast<uint32_t>(l.act));
        for (double x : l.w.data) put_f64(os, x);
        for (double x : l.b) put_f64(os, x);
    }
    if (!os) throw IoError("write failed: " + path);
}

FeedForwardNet load_net(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kNetMagic, 8) != 0)
        throw IoError("bad checkpoint magic: " + path);
    const uint32_t version = get_u32(is, path);
    if (version != kNetFormatVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    const uint32_t n_layers = get_u32(is, path);
    if (n_layers == 0 || n_layers > 1024) throw IoError("implausible layer count: " + path);

    FeedForwardNet net;
    for (uint32_t li = 0; li < n_layers; ++li) {
        const uint32_t fan_in = get_u32(is, path);
        const uint32_t fan_out = get_u32(is, path);
        const uint32_t act = get_u32(is, path);
        if (fan_in == 0 || fan_out == 0 || fan_in > (1u << 20) || fan_out > (1u << 20))
            throw IoError("implausible layer shape in " + path);
        if (act > static_cast<uint32_t>(Activation::silu))
            throw IoError("unknown activation tag in " + path);
        Layer l;
        l.w = Matrix(static_cast<int>(fan_out), static_cast<int>(fan_in));
        for (double& x : l.w.data) x = get_f64(is, path);
        l.b = Vec(fan_out);
        for (double& x : l.b) x = get_f64(is, path);
        l.act = static_cast<Activation>(act);
        net.layers.push_back(std::move(l));
    }
    net.input_width = net.layers.front().fan_in();
    net.output_width = net.layers.back().fan_out();
    for (size_t i = 1; i < net.layers.size(); ++i)
        if (net.layers[i].fan_in() != net.layers[i - 1].fan_out())
            throw IoError("inconsistent layer widths in " + path);
    return net;
}

}  // namespace xdiff
