#pragma once

// Self-describing container of named, typed n-d arrays.
//
// Layout (little-endian):
//   "PVARRAY\0"  u32 version  u32 count
//   per array:   u16 name_len, name, u8 dtype, u8 rank, i64 dims[rank], u64 nbytes, bytes
//   u64 FNV-1a digest of everything above
//
// Used for videos, tracking tubes and checkpoints.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace previts {

enum class DType : std::uint8_t { U8 = 0, I32 = 1, F32 = 2, F64 = 3, I64 = 4 };

class ArrayStore {
public:
    static constexpr std::uint32_t kVersion = 1;

    struct Entry {
        DType dtype{};
        std::vector<std::int64_t> dims;
        std::vector<std::uint8_t> bytes;
    };

    void put_u8(const std::string& name, std::vector<std::int64_t> dims, std::span<const std::uint8_t> v);
    void put_i32(const std::string& name, std::vector<std::int64_t> dims, std::span<const std::int32_t> v);
    void put_i64(const std::string& name, std::vector<std::int64_t> dims, std::span<const std::int64_t> v);
    void put_f32(const std::string& name, std::vector<std::int64_t> dims, std::span<const float> v);
    void put_f64(const std::string& name, std::vector<std::int64_t> dims, std::span<const double> v);
    void put_text(const std::string& name, const std::string& text);

    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    const Entry& entry(const std::string& name) const;
    const std::vector<std::int64_t>& dims(const std::string& name) const { return entry(name).dims; }

    std::vector<std::uint8_t> get_u8(const std::string& name) const;
    std::vector<std::int32_t> get_i32(const std::string& name) const;
    std::vector<std::int64_t> get_i64(const std::string& name) const;
    std::vector<float> get_f32(const std::string& name) const;
    std::vector<double> get_f64(const std::string& name) const;
    std::string get_text(const std::string& name) const;

    std::vector<std::string> names() const;

    // Throws std::runtime_error naming the path on I/O failure or corruption.
    void save(const std::filesystem::path& path) const;
    static ArrayStore load(const std::filesystem::path& path);

private:
    void put(const std::string& name, DType dtype, std::vector<std::int64_t> dims, const void* data,
             std::size_t element_size, std::size_t count);
    template <typename T>
    std::vector<T> get(const std::string& name, DType dtype) const;

    std::map<std::string, Entry> entries_;
};

}  // namespace previts
