// serialize.cpp - binary containers, PGM writer and key=value config
#include "moelab/serialize.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace moelab {

namespace {

void append_u32(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_f32(std::string& out, float v) { append_u32(out, std::bit_cast<std::uint32_t>(v)); }

void append_u64(std::string& out, std::uint64_t v) {
    append_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
    append_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void append_f64(std::string& out, double v) { append_u64(out, std::bit_cast<std::uint64_t>(v)); }

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw std::runtime_error("read from '" + path + "' failed");
    return bytes;
}

// Sequential little-endian reader that reports the byte offset of any defect.
class Reader {
public:
    Reader(const std::string& path, const std::string& bytes) : path_(path), bytes_(bytes) {}

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

    void expect_magic(const char* magic) {
        const std::size_t at = offset_;
        if (remaining() < 4)
            fail("expected 4-byte magic '" + std::string(magic) + "', file ends after " +
                     std::to_string(remaining()) + " bytes",
                 at);
        const std::string got = bytes_.substr(offset_, 4);
        if (got != magic)
            fail("expected magic '" + std::string(magic) + "', got '" + printable(got) + "'", at);
        offset_ += 4;
    }

    std::uint32_t read_u32(const char* what) {
        const std::size_t at = offset_;
        if (remaining() < 4)
            fail("truncated " + std::string(what) + ": needed 4 bytes, " +
                     std::to_string(remaining()) + " left",
                 at);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i)
            v = (v << 8) | static_cast<std::uint8_t>(bytes_[offset_ + static_cast<std::size_t>(i)]);
        offset_ += 4;
        return v;
    }

    std::uint64_t read_u64(const char* what) {
        const std::uint64_t lo = read_u32(what);
        const std::uint64_t hi = read_u32(what);
        return lo | (hi << 32);
    }

    float read_f32(const char* what) { return std::bit_cast<float>(read_u32(what)); }
    double read_f64(const char* what) { return std::bit_cast<double>(read_u64(what)); }

    std::string read_bytes(std::size_t n, const char* what) {
        const std::size_t at = offset_;
        if (remaining() < n)
            fail("truncated " + std::string(what) + ": needed " + std::to_string(n) + " bytes, " +
                     std::to_string(remaining()) + " left",
                 at);
        std::string out = bytes_.substr(offset_, n);
        offset_ += n;
        return out;
    }

    [[noreturn]] void fail(const std::string& message, std::size_t at) const {
        throw std::runtime_error(path_ + ": at byte " + std::to_string(at) + ": " + message);
    }

private:
    static std::string printable(const std::string& raw) {
        std::string out;
        for (char c : raw)
            out += std::isprint(static_cast<unsigned char>(c)) ? std::string(1, c)
                                                               : std::string("?");
        return out;
    }

    const std::string& path_;
    const std::string& bytes_;
    std::size_t offset_ = 0;
};

std::uint32_t checked_u32_dim(std::size_t v, const char* what) {
    if (v > std::numeric_limits<std::uint32_t>::max())
        throw std::invalid_argument(std::string("serialize: ") + what + " " + std::to_string(v) +
                                    " does not fit in 32 bits");
    return static_cast<std::uint32_t>(v);
}

}  // namespace

void save_embeddings(const std::string& path, const Tensor& states) {
    if (states.rank() != 3)
        throw std::invalid_argument("save_embeddings: states must be rank-3 (B x S x H), got rank " +
                                    std::to_string(states.rank()));
    std::string bytes;
    bytes.reserve(20 + states.size() * 4);
    bytes += "MOEB";
    append_u32(bytes, 1);
    append_u32(bytes, checked_u32_dim(states.dim(0), "batch dim"));
    append_u32(bytes, checked_u32_dim(states.dim(1), "sequence dim"));
    append_u32(bytes, checked_u32_dim(states.dim(2), "hidden dim"));
    for (std::size_t i = 0; i < states.size(); ++i)
        append_f32(bytes, static_cast<float>(states[i]));
    write_file(path, bytes);
}

Tensor load_embeddings(const std::string& path) {
    const std::string bytes = read_file(path);
    Reader r(path, bytes);
    r.expect_magic("MOEB");
    const std::uint32_t version = r.read_u32("version");
    if (version != 1)
        r.fail("unsupported version " + std::to_string(version) + ", expected 1", r.offset() - 4);
    const std::size_t b = r.read_u32("batch dim");
    const std::size_t s = r.read_u32("sequence dim");
    const std::size_t h = r.read_u32("hidden dim");
    if (b == 0 || s == 0 || h == 0)
        r.fail("dimensions must be positive, got " + std::to_string(b) + " x " +
                   std::to_string(s) + " x " + std::to_string(h),
               8);
    const std::size_t expected = b * s * h * 4;
    if (r.remaining() != expected)
        r.fail("payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                   std::to_string(expected) + " (" + std::to_string(b) + "*" + std::to_string(s) +
                   "*" + std::to_string(h) + "*4)",
               r.offset());
    Tensor out({b, s, h});
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<double>(r.read_f32("payload"));
    return out;
}

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
    std::string bytes;
    bytes += "MOET";
    append_u32(bytes, 1);
    append_u32(bytes, checked_u32_dim(tensors.size(), "tensor count"));
    for (const auto& [name, tensor] : tensors) {
        if (tensor == nullptr)
            throw std::invalid_argument("save_tensors: tensor '" + name + "' is null");
        append_u32(bytes, checked_u32_dim(name.size(), "name length"));
        bytes += name;
        append_u32(bytes, checked_u32_dim(tensor->rank(), "rank"));
        for (std::size_t d = 0; d < tensor->rank(); ++d)
            append_u32(bytes, checked_u32_dim(tensor->dim(d), "dimension"));
        for (std::size_t i = 0; i < tensor->size(); ++i) append_f64(bytes, (*tensor)[i]);
    }
    write_file(path, bytes);
}

std::vector<std::pair<std::string, Tensor>> load_tensors(const std::string& path) {
    const std::string bytes = read_file(path);
    Reader r(path, bytes);
    r.expect_magic("MOET");
    const std::uint32_t version = r.read_u32("version");
    if (version != 1)
        r.fail("unsupported version " + std::to_string(version) + ", expected 1", r.offset() - 4);
    const std::uint32_t count = r.read_u32("tensor count");
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint32_t name_len = r.read_u32("name length");
        const std::string name = r.read_bytes(name_len, "tensor name");
        const std::uint32_t rank = r.read_u32("rank");
        if (rank == 0 || rank > 3)
            r.fail("tensor '" + name + "' has rank " + std::to_string(rank) +
                       ", expected 1 to 3",
                   r.offset() - 4);
        std::vector<std::size_t> shape(rank);
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = r.read_u32("dimension");
            if (shape[d] == 0) r.fail("tensor '" + name + "' has a zero dimension", r.offset() - 4);
            total *= shape[d];
        }
        Tensor tensor(shape);
        for (std::size_t i = 0; i < total; ++i) tensor[i] = r.read_f64("payload");
        out.emplace_back(name, std::move(tensor));
    }
    if (r.remaining() != 0)
        r.fail(std::to_string(r.remaining()) + " trailing bytes after the last tensor",
               r.offset());
    return out;
}

void save_parameters(const std::string& path, const std::vector<NamedParam>& params) {
    std::vector<std::pair<std::string, const Tensor*>> tensors;
    tensors.reserve(params.size());
    for (const NamedParam& p : params) tensors.emplace_back(p.name, p.tensor);
    save_tensors(path, tensors);
}

void load_parameters(const std::string& path, const std::vector<NamedParam>& params) {
    std::vector<std::pair<std::string, Tensor>> loaded = load_tensors(path);
    if (loaded.size() != params.size())
        throw std::runtime_error(path + ": holds " + std::to_string(loaded.size()) +
                                 " tensors, expected " + std::to_string(params.size()));
    std::vector<bool> used(loaded.size(), false);
    for (const NamedParam& p : params) {
        bool found = false;
        for (std::size_t i = 0; i < loaded.size(); ++i) {
            if (used[i] || loaded[i].first != p.name) continue;
            if (!loaded[i].second.same_shape(*p.tensor))
                throw std::runtime_error(path + ": tensor '" + p.name +
                                         "' has a different shape than the parameter");
            *p.tensor = std::move(loaded[i].second);
            used[i] = true;
            found = true;
            break;
        }
        if (!found) throw std::runtime_error(path + ": missing tensor '" + p.name + "'");
    }
}

void write_pgm(const std::string& path, const Tensor& matrix) {
    if (matrix.rank() != 2)
        throw std::invalid_argument("write_pgm: matrix must be rank-2, got rank " +
                                    std::to_string(matrix.rank()));
    std::string bytes = "P5\n" + std::to_string(matrix.cols()) + " " +
                        std::to_string(matrix.rows()) + "\n255\n";
    bytes.reserve(bytes.size() + matrix.size());
    for (std::size_t i = 0; i < matrix.size(); ++i) {
        double v = matrix[i];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        bytes.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    write_file(path, bytes);
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key in '" + line + "'");
        pairs.emplace_back(key, value);
    }
    return pairs;
}

std::vector<std::pair<std::string, std::string>> parse_kv_file(const std::string& path) {
    return parse_kv_text(read_file(path));
}

std::string format_kv(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::string out;
    for (const auto& [key, value] : pairs) out += key + " = " + value + "\n";
    return out;
}

}  // namespace moelab
