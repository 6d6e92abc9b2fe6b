#pragma once

// Shared text/binary container helpers for the file formats.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "noiselens/error.hpp"

namespace noiselens::io {

inline constexpr std::array<char, 4> kMagic{'N', 'L', 'N', 'S'};
inline constexpr std::uint16_t kBinaryVersion = 1;

enum class BinaryKind : std::uint16_t {
    dataset = 1,
    scores = 2,
    bank = 3,
    classifier = 4,
    embeddings = 5,
};

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view token, std::size_t record);
std::int64_t parse_int(std::string_view token, std::size_t record);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string join_doubles(const double* values, std::size_t n);

struct Header {
    std::string tag;      // e.g. "noiselens-dataset"
    std::string version;  // "v1"
    std::map<std::string, std::string> fields;

    const std::string& field(const std::string& key) const;
    std::int64_t int_field(const std::string& key) const;
    double double_field(const std::string& key) const;
};

/// Parses `#<tag> <version> KEY=VALUE ...`; checks tag and version.
Header parse_header(const std::string& line, std::string_view expected_tag);

bool is_binary_file(const std::filesystem::path& path);

std::ifstream open_input(const std::filesystem::path& path, bool binary);
std::ofstream open_output(const std::filesystem::path& path, bool binary);

/// Reads data lines of a text file after the header line. Blank lines and
/// `#` comment lines are skipped; the 1-based record number is reported.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}
    bool next(std::string& line);
    std::size_t record() const noexcept { return record_; }
    /// Comment lines seen so far (without the leading '#').
    const std::vector<std::string>& comments() const noexcept { return comments_; }

private:
    std::istream& in_;
    std::size_t record_ = 0;
    std::vector<std::string> comments_;
};

class BinaryWriter {
public:
    BinaryWriter(std::ostream& out, BinaryKind kind);

    template <typename T>
    void put(T value) {
        static_assert(std::is_arithmetic_v<T>);
        std::array<unsigned char, sizeof(T)> bytes;
        if constexpr (std::is_floating_point_v<T>) {
            using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
            store(std::bit_cast<U>(value), bytes);
        } else {
            store(static_cast<std::make_unsigned_t<T>>(value), bytes);
        }
        out_.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
    }
    void put_string(const std::string& s);

private:
    template <typename U, std::size_t N>
    static void store(U value, std::array<unsigned char, N>& bytes) {
        for (std::size_t i = 0; i < N; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
    }

    std::ostream& out_;
};

class BinaryReader {
public:
    BinaryReader(std::istream& in, BinaryKind expected);

    template <typename T>
    T get() {
        static_assert(std::is_arithmetic_v<T>);
        std::array<unsigned char, sizeof(T)> bytes;
        in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
        if (!in_) throw Error("truncated binary file");
        using U = std::conditional_t<
            sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
        U value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
        if constexpr (std::is_floating_point_v<T>) {
            return std::bit_cast<T>(value);
        } else {
            return static_cast<T>(value);
        }
    }
    std::string get_string();

private:
    std::istream& in_;
};

}  // namespace noiselens::io
