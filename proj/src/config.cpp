#include "ultratac/config.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ultratac {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    // ini_parser only understands ';' comments; normalise '#' and drop trailing comments.
    std::ostringstream cleaned;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto cut = line.find_first_of("#;");
        if (cut != std::string::npos) line.erase(cut);
        cleaned << trim(line) << '\n';
    }
    KeyValueConfig cfg;
    try {
        std::istringstream src(cleaned.str());
        pt::read_ini(src, cfg.tree_);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config parse error at line " + std::to_string(e.line()) + ": " + e.message());
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::optional<std::string> KeyValueConfig::find(const std::string& key) const {
    auto node = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!node) return std::nullopt;
    return trim(*node);
}

bool KeyValueConfig::has(const std::string& key) const { return find(key).has_value(); }

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

double parse_double(std::string_view text, const std::string& what) {
    std::string t = trim(text);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("invalid number for " + what + ": '" + t + "'");
    return value;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? parse_double(*v, key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    long long value = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), value);
    if (ec != std::errc{} || ptr != v->data() + v->size() || v->empty())
        throw ConfigError("invalid integer for " + key + ": '" + *v + "'");
    return value;
}

std::vector<std::string> KeyValueConfig::get_list(const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    const std::vector<double>& fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& s : get_list(key, {})) out.push_back(parse_double(s, key));
    return out;
}

std::vector<std::string> KeyValueConfig::sections() const {
    std::vector<std::string> out;
    for (const auto& [name, child] : tree_)
        if (!child.empty()) out.push_back(name);
    return out;
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    tree_.put(pt::ptree::path_type(key, '.'), value);
}

std::string KeyValueConfig::to_string() const {
    std::ostringstream out;
    pt::write_ini(out, tree_);
    return out.str();
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    (void)ec;
    return std::string(buf, ptr);
}

std::string format_fixed(double value, int digits) {
    if (std::isnan(value)) return "nan";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed, digits);
    if (ec != std::errc{}) return format_double(value);
    std::string s(buf, ptr);
    // "-0.000" -> "0.000"
    if (s.size() > 1 && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) return s.substr(1);
    return s;
}

}  // namespace ultratac
