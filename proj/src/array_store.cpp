#include "previts/array_store.hpp"

#include "previts/rng.hpp"

#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace previts {

namespace {

constexpr char kMagic[8] = {'P', 'V', 'A', 'R', 'R', 'A', 'Y', '\0'};

std::size_t element_size(DType d) {
    switch (d) {
        case DType::U8: return 1;
        case DType::I32: return 4;
        case DType::F32: return 4;
        case DType::F64: return 8;
        case DType::I64: return 8;
    }
    throw std::invalid_argument("unknown dtype");
}

template <typename T>
void append(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    Reader(const std::string& buf, std::filesystem::path path) : buf_(buf), path_(std::move(path)) {}

    template <typename T>
    T read() {
        T v;
        take(&v, sizeof(T));
        return v;
    }
    void take(void* dst, std::size_t n) {
        if (pos_ + n > buf_.size()) fail("truncated");
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t pos() const { return pos_; }
    [[noreturn]] void fail(const std::string& why) const {
        throw std::runtime_error("corrupt array container " + path_.string() + ": " + why);
    }

private:
    const std::string& buf_;
    std::filesystem::path path_;
    std::size_t pos_ = 0;
};

}  // namespace

void ArrayStore::put(const std::string& name, DType dtype, std::vector<std::int64_t> dims, const void* data,
                     std::size_t elem, std::size_t count) {
    const auto expected = std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
    if (static_cast<std::size_t>(expected) != count) {
        throw std::invalid_argument("array '" + name + "': dims do not match element count");
    }
    Entry e{dtype, std::move(dims), std::vector<std::uint8_t>(elem * count)};
    if (count) std::memcpy(e.bytes.data(), data, elem * count);
    entries_[name] = std::move(e);
}

void ArrayStore::put_u8(const std::string& n, std::vector<std::int64_t> d, std::span<const std::uint8_t> v) {
    put(n, DType::U8, std::move(d), v.data(), 1, v.size());
}
void ArrayStore::put_i32(const std::string& n, std::vector<std::int64_t> d, std::span<const std::int32_t> v) {
    put(n, DType::I32, std::move(d), v.data(), 4, v.size());
}
void ArrayStore::put_i64(const std::string& n, std::vector<std::int64_t> d, std::span<const std::int64_t> v) {
    put(n, DType::I64, std::move(d), v.data(), 8, v.size());
}
void ArrayStore::put_f32(const std::string& n, std::vector<std::int64_t> d, std::span<const float> v) {
    put(n, DType::F32, std::move(d), v.data(), 4, v.size());
}
void ArrayStore::put_f64(const std::string& n, std::vector<std::int64_t> d, std::span<const double> v) {
    put(n, DType::F64, std::move(d), v.data(), 8, v.size());
}
void ArrayStore::put_text(const std::string& name, const std::string& text) {
    put(name, DType::U8, {static_cast<std::int64_t>(text.size())}, text.data(), 1, text.size());
}

const ArrayStore::Entry& ArrayStore::entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::out_of_range("array '" + name + "' not present");
    return it->second;
}

template <typename T>
std::vector<T> ArrayStore::get(const std::string& name, DType dtype) const {
    const Entry& e = entry(name);
    if (e.dtype != dtype) throw std::runtime_error("array '" + name + "' has a different dtype");
    std::vector<T> out(e.bytes.size() / sizeof(T));
    if (!out.empty()) std::memcpy(out.data(), e.bytes.data(), e.bytes.size());
    return out;
}

std::vector<std::uint8_t> ArrayStore::get_u8(const std::string& n) const { return get<std::uint8_t>(n, DType::U8); }
std::vector<std::int32_t> ArrayStore::get_i32(const std::string& n) const { return get<std::int32_t>(n, DType::I32); }
std::vector<std::int64_t> ArrayStore::get_i64(const std::string& n) const { return get<std::int64_t>(n, DType::I64); }
std::vector<float> ArrayStore::get_f32(const std::string& n) const { return get<float>(n, DType::F32); }
std::vector<double> ArrayStore::get_f64(const std::string& n) const { return get<double>(n, DType::F64); }

std::string ArrayStore::get_text(const std::string& name) const {
    const auto bytes = get_u8(name);
    return {bytes.begin(), bytes.end()};
}

std::vector<std::string> ArrayStore::names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
}

void ArrayStore::save(const std::filesystem::path& path) const {
    std::string buf(kMagic, sizeof(kMagic));
    append(buf, kVersion);
    append(buf, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [name, e] : entries_) {
        append(buf, static_cast<std::uint16_t>(name.size()));
        buf += name;
        append(buf, static_cast<std::uint8_t>(e.dtype));
        append(buf, static_cast<std::uint8_t>(e.dims.size()));
        for (auto d : e.dims) append(buf, d);
        append(buf, static_cast<std::uint64_t>(e.bytes.size()));
        buf.append(reinterpret_cast<const char*>(e.bytes.data()), e.bytes.size());
    }
    append(buf, fnv1a(buf));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ArrayStore ArrayStore::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open array container " + path.string());
    const std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    Reader r(buf, path);
    if (buf.size() < sizeof(kMagic) + 16 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
        r.fail("bad magic");
    }
    const std::string_view payload(buf.data(), buf.size() - 8);
    std::uint64_t digest;
    std::memcpy(&digest, buf.data() + buf.size() - 8, 8);
    if (digest != fnv1a(payload)) r.fail("checksum mismatch");

    char magic[8];
    r.take(magic, 8);
    if (r.read<std::uint32_t>() != kVersion) r.fail("unsupported version");
    const auto count = r.read<std::uint32_t>();
    ArrayStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name(r.read<std::uint16_t>(), '\0');
        r.take(name.data(), name.size());
        const auto dtype = static_cast<DType>(r.read<std::uint8_t>());
        if (static_cast<std::uint8_t>(dtype) > 4) r.fail("unknown dtype in '" + name + "'");
        Entry e{dtype, std::vector<std::int64_t>(r.read<std::uint8_t>()), {}};
        for (auto& d : e.dims) d = r.read<std::int64_t>();
        const auto nbytes = r.read<std::uint64_t>();
        if (nbytes > buf.size()) r.fail("array '" + name + "' overruns file");
        e.bytes.resize(nbytes);
        r.take(e.bytes.data(), nbytes);
        const auto n = std::accumulate(e.dims.begin(), e.dims.end(), std::int64_t{1}, std::multiplies<>());
        if (static_cast<std::uint64_t>(n) * element_size(dtype) != nbytes) r.fail("array '" + name + "' size");
        store.entries_[name] = std::move(e);
    }
    if (r.pos() != buf.size() - 8) r.fail("trailing bytes");
    return store;
}

}  // namespace previts
