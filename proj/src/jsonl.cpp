#include "biasaudit/jsonl.hpp"

#include <fstream>
#include <sstream>

namespace biasaudit {

namespace {
void ensure_parent(const std::filesystem::path& path) {
    auto parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}
}  // namespace

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed JSON line: " + e.what());
        }
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& row : rows) out << row.dump() << '\n';
}

void append_jsonl(const std::filesystem::path& path, const nlohmann::json& row) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw DataError("cannot append to " + path.string());
    out << row.dump() << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed JSON: " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

}  // namespace biasaudit
