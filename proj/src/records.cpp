#include "hypermem/records.hpp"

#include "hypermem/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hypermem {

namespace fs = std::filesystem;

namespace {

void atomic_write(const fs::path& path, const std::string& contents, std::ios::openmode mode) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, mode | std::ios::trunc);
        if (!out) {
            throw Error("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw Error("write to '" + tmp.string() + "' failed");
        }
    }
    fs::rename(tmp, path);
}

}  // namespace

std::string to_record_line(const json& record) {
    return record.dump(-1, ' ', false, json::error_handler_t::strict);
}

void write_records(const fs::path& path, const std::vector<json>& records) {
    std::string buffer;
    for (const auto& r : records) {
        buffer += to_record_line(r);
        buffer += '\n';
    }
    atomic_write(path, buffer, std::ios::out | std::ios::binary);
}

std::vector<json> read_records(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open record file '" + path.string() + "'");
    }
    std::vector<json> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            records.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
        }
        if (!records.back().is_object()) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": record is not an object");
        }
    }
    return records;
}

void write_text_file(const fs::path& path, const std::string& contents) {
    atomic_write(path, contents, std::ios::out | std::ios::binary);
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_float32_rows(const fs::path& path, const std::vector<std::vector<float>>& rows) {
    std::string buffer;
    for (const auto& row : rows) {
        for (float f : row) {
            auto bits = std::bit_cast<std::uint32_t>(f);
            for (int b = 0; b < 4; ++b) {
                buffer += static_cast<char>((bits >> (8 * b)) & 0xFFu);
            }
        }
    }
    atomic_write(path, buffer, std::ios::out | std::ios::binary);
}

std::vector<std::vector<float>> read_float32_rows(const fs::path& path, std::size_t dim,
                                                  std::size_t expected_rows) {
    if (expected_rows == 0) {
        if (fs::exists(path) && fs::file_size(path) != 0) {
            throw FormatError("'" + path.string() + "' holds data but no rows were expected");
        }
        return {};
    }
    const std::string bytes = read_text_file(path);
    if (dim == 0 || bytes.size() != expected_rows * dim * 4) {
        throw FormatError("'" + path.string() + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected_rows * dim * 4));
    }
    std::vector<std::vector<float>> rows(expected_rows, std::vector<float>(dim));
    std::size_t pos = 0;
    for (auto& row : rows) {
        for (auto& value : row) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
            }
            value = std::bit_cast<float>(bits);
        }
    }
    return rows;
}

const json& require_field(const json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end()) {
        throw FormatError(std::string("record is missing field '") + key + "'");
    }
    return *it;
}

std::string require_string(const json& record, const char* key) {
    const auto& v = require_field(record, key);
    if (!v.is_string()) {
        throw FormatError(std::string("field '") + key + "' is not a string");
    }
    return v.get<std::string>();
}

long long require_int(const json& record, const char* key) {
    const auto& v = require_field(record, key);
    if (!v.is_number_integer()) {
        throw FormatError(std::string("field '") + key + "' is not an integer");
    }
    return v.get<long long>();
}

}  // namespace hypermem
