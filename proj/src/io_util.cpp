#include "io_util.hpp"

#include <sstream>

namespace noiselens::io {

std::string format_double(double value) {
    std::array<char, 32> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc()) throw Error("cannot format number");
    return std::string(buf.data(), end);
}

double parse_double(std::string_view token, std::size_t record) {
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\r')) token.remove_suffix(1);
    if (!token.empty() && token.front() == '+') token.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
        throw Error("malformed number '" + std::string(token) + "'", record);
    }
    return value;
}

std::int64_t parse_int(std::string_view token, std::size_t record) {
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\r')) token.remove_suffix(1);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
        throw Error("malformed integer '" + std::string(token) + "'", record);
    }
    return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join_doubles(const double* values, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

const std::string& Header::field(const std::string& key) const {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error("header of " + tag + " is missing field " + key);
    return it->second;
}

std::int64_t Header::int_field(const std::string& key) const {
    return parse_int(field(key), 0);
}

double Header::double_field(const std::string& key) const {
    return parse_double(field(key), 0);
}

Header parse_header(const std::string& line, std::string_view expected_tag) {
    if (line.empty() || line[0] != '#') {
        throw Error("missing #" + std::string(expected_tag) + " header line");
    }
    std::istringstream in(line.substr(1));
    Header h;
    in >> h.tag >> h.version;
    if (h.tag != expected_tag) {
        throw Error("expected #" + std::string(expected_tag) + " header, found #" + h.tag);
    }
    if (h.version != "v1") throw Error("unsupported " + h.tag + " version " + h.version);
    std::string token;
    while (in >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw Error("malformed header field '" + token + "'");
        h.fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return h;
}

bool is_binary_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::array<char, 4> head{};
    in.read(head.data(), head.size());
    return in.gcount() == 4 && head == kMagic;
}

std::ifstream open_input(const std::filesystem::path& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

bool LineReader::next(std::string& line) {
    while (std::getline(in_, line)) {
        ++record_;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            comments_.push_back(line.substr(1));
            continue;
        }
        return true;
    }
    return false;
}

BinaryWriter::BinaryWriter(std::ostream& out, BinaryKind kind) : out_(out) {
    out_.write(kMagic.data(), kMagic.size());
    put<std::uint16_t>(kBinaryVersion);
    put<std::uint16_t>(static_cast<std::uint16_t>(kind));
}

void BinaryWriter::put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

BinaryReader::BinaryReader(std::istream& in, BinaryKind expected) : in_(in) {
    std::array<char, 4> magic{};
    in_.read(magic.data(), magic.size());
    if (!in_ || magic != kMagic) throw Error("missing NLNS magic");
    const auto version = get<std::uint16_t>();
    if (version != kBinaryVersion) throw Error("unsupported binary version " + std::to_string(version));
    const auto kind = get<std::uint16_t>();
    if (kind != static_cast<std::uint16_t>(expected)) {
        throw Error("binary container holds kind " + std::to_string(kind) + ", expected " +
                    std::to_string(static_cast<std::uint16_t>(expected)));
    }
}

std::string BinaryReader::get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw Error("truncated binary file");
    return s;
}

}  // namespace noiselens::io
