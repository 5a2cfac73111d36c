#include "xfrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace xfrl::cfg {
namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::filesystem::path& origin, std::size_t line, const std::string& what) {
    throw config_error(origin.string() + ":" + std::to_string(line) + ": " + what);
}

const Entry& require(const Config& c, const std::string& key) {
    auto it = c.entries.find(key);
    if (it == c.entries.end()) throw config_error("missing required config key '" + key + "'");
    return it->second;
}

long parse_long(const Config& c, const std::string& key, const Entry& e) {
    const std::string v = e.value;
    char* end = nullptr;
    errno = 0;
    long r = std::strtol(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        fail(c.origin, e.line, "key '" + key + "' expects an integer, got '" + v + "'");
    return r;
}

double parse_dbl(const Config& c, const std::string& key, const Entry& e) {
    const std::string v = e.value;
    char* end = nullptr;
    errno = 0;
    double r = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        fail(c.origin, e.line, "key '" + key + "' expects a number, got '" + v + "'");
    return r;
}

}  // namespace

const std::map<std::string, std::vector<std::string>>& known_keys() {
    static const std::map<std::string, std::vector<std::string>> k = {
        {"network",
         {"architecture", "head", "num_classes", "source_checkpoint", "transfer_layers", "freeze"}},
        {"data",
         {"preset", "dir", "source_preset", "source_dir", "target_per_class", "source_per_class",
          "stages"}},
        {"train",
         {"epochs", "batch_size", "base_lr", "seed", "eval_every", "head_lr_multiplier",
          "lr_multipliers"}},
        {"adapt",
         {"lambda", "alphas", "adaptation_layers", "estimator", "lambda_decay_factor",
          "lambda_decay_at", "offshelf_upto", "step1_epochs", "step1_lr", "source_pool"}},
        {"sweep", {"layers", "freeze"}},
        {"output", {"dir", "svg", "checkpoint", "log"}},
    };
    return k;
}

Config parse_config_text(const std::string& text, const std::filesystem::path& origin) {
    Config c;
    c.origin = origin;
    c.base_dir = origin.has_parent_path() ? origin.parent_path() : std::filesystem::path(".");
    const auto& schema = known_keys();

    std::istringstream in(text);
    std::string raw;
    std::string section;
    const std::vector<std::string>* section_keys = nullptr;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, line_no, "unterminated section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            auto it = schema.find(section);
            if (it == schema.end()) fail(origin, line_no, "unknown section [" + section + "]");
            section_keys = &it->second;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(origin, line_no, "expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "empty key");
        if (section.empty()) fail(origin, line_no, "key '" + key + "' appears before any [section]");
        if (std::find(section_keys->begin(), section_keys->end(), key) == section_keys->end())
            fail(origin, line_no, "unknown key '" + key + "' in section [" + section + "]");
        std::string full = section + "." + key;
        auto prev = c.entries.find(full);
        if (prev != c.entries.end())
            fail(origin, line_no,
                 "duplicate key '" + full + "' (first set on line " +
                     std::to_string(prev->second.line) + ")");
        c.entries[full] = Entry{value, line_no};
    }
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

std::string Config::get_str(const std::string& key) const { return require(*this, key).value; }

std::string Config::get_str_or(const std::string& key, const std::string& dflt) const {
    auto it = entries.find(key);
    return it == entries.end() ? dflt : it->second.value;
}

long Config::get_int(const std::string& key) const {
    return parse_long(*this, key, require(*this, key));
}

long Config::get_int_or(const std::string& key, long dflt) const {
    auto it = entries.find(key);
    return it == entries.end() ? dflt : parse_long(*this, key, it->second);
}

double Config::get_double(const std::string& key) const {
    return parse_dbl(*this, key, require(*this, key));
}

double Config::get_double_or(const std::string& key, double dflt) const {
    auto it = entries.find(key);
    return it == entries.end() ? dflt : parse_dbl(*this, key, it->second);
}

bool Config::get_bool_or(const std::string& key, bool dflt) const {
    auto it = entries.find(key);
    if (it == entries.end()) return dflt;
    const std::string& v = it->second.value;
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    fail(origin, it->second.line, "key '" + key + "' expects a boolean, got '" + v + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) const {
    const Entry& e = require(*this, key);
    std::vector<double> out;
    std::istringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        Entry one{trim(item), e.line};
        out.push_back(parse_dbl(*this, key, one));
    }
    if (out.empty()) fail(origin, e.line, "key '" + key + "' expects a comma-separated list");
    return out;
}

std::vector<long> Config::get_ints(const std::string& key) const {
    const Entry& e = require(*this, key);
    std::vector<long> out;
    std::istringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        Entry one{trim(item), e.line};
        out.push_back(parse_long(*this, key, one));
    }
    if (out.empty()) fail(origin, e.line, "key '" + key + "' expects a comma-separated list");
    return out;
}

std::vector<std::string> Config::get_strs(const std::string& key) const {
    const Entry& e = require(*this, key);
    std::vector<std::string> out;
    std::istringstream ss(e.value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    if (out.empty()) fail(origin, e.line, "key '" + key + "' expects a comma-separated list");
    return out;
}

std::filesystem::path Config::get_path(const std::string& key) const {
    std::filesystem::path p(require(*this, key).value);
    if (p.is_absolute()) return p;
    return base_dir / p;
}

}  // namespace xfrl::cfg
