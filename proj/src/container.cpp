#include "descatter/container.hpp"

#include <cstdint>
#include <fstream>

#include "descatter/errors.hpp"

namespace descatter {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

void check_name(const std::string& name) {
    if (name.empty()) throw ConfigError("container: empty entry name");
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
        if (!ok) throw ConfigError("container: entry name '" + name + "' has unsupported characters");
    }
}

}  // namespace

void write_f32(const std::filesystem::path& path, const Grid& g) {
    std::vector<float> buf(g.npix());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(g.vec()[i]);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!out) throw ConfigError("short write to " + path.string());
}

Grid read_f32(const std::filesystem::path& path, int n) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ConfigError("cannot open " + path.string());
    const auto bytes = static_cast<size_t>(in.tellg());
    const size_t expect = static_cast<size_t>(n) * n * sizeof(float);
    if (bytes != expect)
        throw ConfigError(path.string() + ": expected " + std::to_string(expect) + " bytes, found " +
                          std::to_string(bytes));
    in.seekg(0);
    std::vector<float> buf(static_cast<size_t>(n) * n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expect));
    if (!in) throw ConfigError("short read from " + path.string());
    Grid g(n);
    for (size_t i = 0; i < buf.size(); ++i) g.vec()[i] = buf[i];
    return g;
}

Container Container::create(const std::filesystem::path& dir, int grid_size, double pixel_pitch,
                            double roi_radius, json meta) {
    if (grid_size < 1) throw ConfigError("container: grid size must be positive");
    if (!(pixel_pitch > 0.0)) throw ConfigError("container: pixel pitch must be positive");
    std::filesystem::create_directories(dir);
    Container c;
    c.dir_ = dir;
    c.grid_size_ = grid_size;
    c.pixel_pitch_ = pixel_pitch;
    c.roi_radius_ = roi_radius;
    c.meta_ = std::move(meta);
    c.save_manifest();
    return c;
}

Container Container::open(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw ConfigError("cannot open " + (dir / "manifest.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("manifest.json: " + std::string(e.what()));
    }
    try {
        if (j.at("schema_version").get<int>() != kSchemaVersion)
            throw ConfigError("manifest.json: unsupported schema version");
        Container c;
        c.dir_ = dir;
        c.grid_size_ = j.at("grid_size").get<int>();
        c.pixel_pitch_ = j.at("pixel_pitch").get<double>();
        c.roi_radius_ = j.at("roi_radius").get<double>();
        c.version_ = j.at("dataset_version").get<int>();
        c.meta_ = j.value("meta", json::object());
        for (const auto& [name, file] : j.at("entries").items())
            c.entries_[name] = file.get<std::string>();
        if (j.contains("json_entries"))
            for (const auto& [name, file] : j.at("json_entries").items())
                c.json_entries_[name] = file.get<std::string>();
        return c;
    } catch (const json::exception& e) {
        throw ConfigError("manifest.json: " + std::string(e.what()));
    }
}

void Container::save_manifest() const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["dataset_version"] = version_;
    j["grid_size"] = grid_size_;
    j["pixel_pitch"] = pixel_pitch_;
    j["roi_radius"] = roi_radius_;
    j["meta"] = meta_;
    j["entries"] = json::object();
    for (const auto& [name, file] : entries_) j["entries"][name] = file;
    j["json_entries"] = json::object();
    for (const auto& [name, file] : json_entries_) j["json_entries"][name] = file;
    const auto path = dir_ / "manifest.json";
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void Container::put(const std::string& name, const Grid& g) {
    check_name(name);
    if (g.n() != grid_size_) throw ConfigError("container: grid size mismatch for '" + name + "'");
    const std::string file = name + ".f32";
    write_f32(dir_ / file, g);
    entries_[name] = file;
    save_manifest();
}

Grid Container::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("container: no entry '" + name + "'");
    return read_f32(dir_ / it->second, grid_size_);
}

Radiograph Container::get_radiograph(const std::string& name) const {
    return Radiograph{get(name), pixel_pitch_, roi_radius_};
}

bool Container::has(const std::string& name) const { return entries_.count(name) != 0; }

std::vector<std::string> Container::entries() const {
    std::vector<std::string> names;
    names.reserve(entries_.size());
    for (const auto& [name, file] : entries_) names.push_back(name);
    return names;
}

void Container::put_json(const std::string& name, const json& j) {
    check_name(name);
    const std::string file = name + ".json";
    std::ofstream out(dir_ / file);
    if (!out) throw ConfigError("cannot write " + (dir_ / file).string());
    out << j.dump(2) << "\n";
    json_entries_[name] = file;
    save_manifest();
}

json Container::get_json(const std::string& name) const {
    auto it = json_entries_.find(name);
    if (it == json_entries_.end()) throw ConfigError("container: no json entry '" + name + "'");
    std::ifstream in(dir_ / it->second);
    if (!in) throw ConfigError("cannot open " + (dir_ / it->second).string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(it->second + ": " + std::string(e.what()));
    }
    return j;
}

bool Container::has_json(const std::string& name) const { return json_entries_.count(name) != 0; }

}  // namespace descatter
