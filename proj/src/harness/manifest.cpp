#include "quad/harness/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace quad::harness {

std::uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checksum: cannot open '" + path + "'");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
        if (!in) break;
    }
    return h;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw DataError("cannot create directory '" + path + "': " + ec.message());
}

Manifest::Manifest(std::string out_dir, std::string command)
    : out_dir_(std::move(out_dir)), command_(std::move(command)) {
    ensure_dir(out_dir_);
}

void Manifest::set_config(const std::string& canonical_config) { config_ = canonical_config; }
void Manifest::set_seed(std::uint64_t seed) { seed_ = seed; }
void Manifest::set_dataset_fingerprint(std::uint64_t fp) { dataset_fp_ = fp; }

void Manifest::add_artifact(const std::string& path) { artifacts_.push_back({path, file_checksum(path)}); }

void Manifest::write() {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["command"] = command_;
    j["seed"] = seed_;
    j["dataset_fingerprint"] = dataset_fp_;
    j["config"] = config_;
    auto arts = nlohmann::ordered_json::array();
    for (const auto& [path, checksum] : artifacts_) {
        arts.push_back({{"path", path}, {"checksum", checksum}});
    }
    j["artifacts"] = arts;

    std::ofstream out(out_dir_ + "/manifest.jsonl", std::ios::app | std::ios::binary);
    if (!out) throw DataError("manifest: cannot open '" + out_dir_ + "/manifest.jsonl'");
    out << j.dump() << '\n';
    if (!out) throw DataError("manifest: write failed");
}

}  // namespace quad::harness
