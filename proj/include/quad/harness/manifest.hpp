#pragma once

#include <string>
#include <vector>

#include "quad/common.hpp"

namespace quad::harness {

// Append-only run record: one JSON line per command invocation, listing the
// config snapshot, seeds, dataset fingerprint, and a checksum for every
// artifact the command wrote.
class Manifest {
public:
    Manifest(std::string out_dir, std::string command);

    void set_config(const std::string& canonical_config);
    void set_seed(std::uint64_t seed);
    void set_dataset_fingerprint(std::uint64_t fp);
    void add_artifact(const std::string& path);

    // Appends the record to <out_dir>/manifest.jsonl.
    void write();

private:
    std::string out_dir_;
    std::string command_;
    std::string config_;
    std::uint64_t seed_ = 0;
    std::uint64_t dataset_fp_ = 0;
    std::vector<std::pair<std::string, std::uint64_t>> artifacts_;
};

std::uint64_t file_checksum(const std::string& path);
void ensure_dir(const std::string& path);

}  // namespace quad::harness
