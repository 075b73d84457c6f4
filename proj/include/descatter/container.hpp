#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "descatter/grid.hpp"

namespace descatter {

// On-disk dataset: a directory holding manifest.json plus one raw headerless
// float32 little-endian row-major file per named grid entry.
class Container {
public:
    static Container create(const std::filesystem::path& dir, int grid_size, double pixel_pitch,
                            double roi_radius, nlohmann::json meta = nlohmann::json::object());
    static Container open(const std::filesystem::path& dir);

    void put(const std::string& name, const Grid& g);
    Grid get(const std::string& name) const;
    Radiograph get_radiograph(const std::string& name) const;
    bool has(const std::string& name) const;
    std::vector<std::string> entries() const;

    void put_json(const std::string& name, const nlohmann::json& j);
    nlohmann::json get_json(const std::string& name) const;
    bool has_json(const std::string& name) const;

    int grid_size() const { return grid_size_; }
    double pixel_pitch() const { return pixel_pitch_; }
    double roi_radius() const { return roi_radius_; }
    int dataset_version() const { return version_; }
    void bump_version() { ++version_; }
    nlohmann::json& meta() { return meta_; }
    const nlohmann::json& meta() const { return meta_; }
    const std::filesystem::path& dir() const { return dir_; }

    void save_manifest() const;

private:
    std::filesystem::path dir_;
    int grid_size_ = 0;
    double pixel_pitch_ = 0.0;
    double roi_radius_ = 0.0;
    int version_ = 1;
    nlohmann::json meta_;
    std::map<std::string, std::string> entries_;       // name -> .f32 file
    std::map<std::string, std::string> json_entries_;  // name -> .json file
};

// float32 grid payloads used by model files as well
void write_f32(const std::filesystem::path& path, const Grid& g);
Grid read_f32(const std::filesystem::path& path, int n);

}  // namespace descatter
