#pragma once

#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "contrakt/error.hpp"

namespace contrakt {

// Line-oriented sectioned text reader shared by the system and network
// file formats. '#' starts a comment (outside quotes), '[name]' opens a
// section, '=' is always its own token, and double-quoted strings become
// single tokens with the quotes stripped.

struct FileToken {
    std::string text;
    bool quoted = false;
};

struct FileLine {
    int number = 0;
    std::vector<FileToken> tokens;
};

struct FileSection {
    std::string name;
    int line = 0;
    std::vector<FileLine> lines;
};

inline std::vector<FileToken> tokenize_line(const std::string& raw, int line_number) {
    std::vector<FileToken> tokens;
    std::size_t i = 0;
    while (i < raw.size()) {
        const char c = raw[i];
        if (c == '#') break;
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '=') {
            tokens.push_back({"=", false});
            ++i;
            continue;
        }
        if (c == '"') {
            const std::size_t close = raw.find('"', i + 1);
            if (close == std::string::npos)
                throw ParseError("unterminated quoted string", line_number,
                                 static_cast<int>(i) + 1);
            tokens.push_back({raw.substr(i + 1, close - i - 1), true});
            i = close + 1;
            continue;
        }
        std::size_t j = i;
        while (j < raw.size() && !std::isspace(static_cast<unsigned char>(raw[j])) &&
               raw[j] != '=' && raw[j] != '#' && raw[j] != '"')
            ++j;
        tokens.push_back({raw.substr(i, j - i), false});
        i = j;
    }
    return tokens;
}

inline std::vector<FileSection> read_sections(std::istream& in) {
    std::vector<FileSection> sections;
    std::string raw;
    int line_number = 0;
    while (std::getline(in, raw)) {
        ++line_number;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        std::string trimmed = raw;
        const auto first = trimmed.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (trimmed[first] == '#') continue;
        if (trimmed[first] == '[') {
            const auto close = trimmed.find(']', first);
            if (close == std::string::npos)
                throw ParseError("unterminated section header", line_number,
                                 static_cast<int>(first) + 1);
            FileSection s;
            s.name = trimmed.substr(first + 1, close - first - 1);
            s.line = line_number;
            sections.push_back(std::move(s));
            continue;
        }
        if (sections.empty())
            throw ParseError("content before the first section header", line_number, 1);
        auto tokens = tokenize_line(raw, line_number);
        if (tokens.empty()) continue;
        sections.back().lines.push_back({line_number, std::move(tokens)});
    }
    return sections;
}

inline double parse_number(const FileToken& tok, int line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok.text, &used);
        if (used != tok.text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError("expected a number, got '" + tok.text + "'", line, 1);
    }
}

/// Flat key = value manifest used for repro thresholds. Values kept as
/// strings; numeric accessors convert on demand.
class Manifest {
public:
    static Manifest load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open manifest: " + path);
        Manifest m;
        std::string raw;
        int line_number = 0;
        while (std::getline(in, raw)) {
            ++line_number;
            auto tokens = tokenize_line(raw, line_number);
            if (tokens.empty()) continue;
            if (tokens.size() < 3 || tokens[1].text != "=")
                throw ParseError("manifest lines must be 'key = value'", line_number, 1);
            std::string value;
            for (std::size_t i = 2; i < tokens.size(); ++i) {
                if (i > 2) value += ' ';
                value += tokens[i].text;
            }
            m.entries_[tokens[0].text] = value;
        }
        return m;
    }

    const std::string& get(const std::string& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw Error("manifest key missing: " + key);
        return it->second;
    }

    double number(const std::string& key) const {
        const std::string& v = get(key);
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw Error("manifest key '" + key + "' is not numeric: " + v);
        }
    }

    bool boolean(const std::string& key) const {
        const std::string& v = get(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw Error("manifest key '" + key + "' is not boolean: " + v);
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace contrakt
