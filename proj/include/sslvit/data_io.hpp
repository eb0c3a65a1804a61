#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sslvit/augment.hpp"
#include "sslvit/tensor.hpp"

namespace sslvit {

// ---- image files ----

/// Reads a binary PPM (P6, maxval 255). Pixels scaled to [0,1].
Image load_ppm(const std::string& path);
void save_ppm(const Image& img, const std::string& path);

/// Writes a single-channel P5 raster. When normalize is set the values are
/// min-max scaled per image; a flat image maps to all zeros.
void save_pgm(const std::vector<float>& values, std::size_t height, std::size_t width,
              const std::string& path, bool normalize);

// ---- dataset manifests ----

struct ManifestEntry {
    std::string path;  // relative to root
    std::optional<int> label;
};

struct DatasetManifest {
    std::string root;
    std::vector<ManifestEntry> entries;
    int version = 1;

    bool labeled() const;
    std::size_t num_classes() const;  // labels form a contiguous 0-based set
};

/// Scans a directory for .ppm files in bytewise lexicographic order,
/// optionally joining labels from a CSV of `filename,label` rows.
DatasetManifest build_manifest(const std::string& dir,
                               const std::optional<std::string>& labels_csv = std::nullopt);

void write_manifest_csv(const DatasetManifest& manifest, const std::string& path);

std::vector<Image> load_corpus(const DatasetManifest& manifest);

// ---- checkpoints ----

struct NamedTensorData {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

/// On-disk layout: magic "DTWN", u32 version, a run of records
/// (u32 name length, name bytes, u32 rank, u32 dims, f32 little-endian
/// payload), then CRC32 of all record bytes. The method tag and the config
/// snapshot travel in a reserved "__config" record whose payload stores the
/// snapshot text one byte per float.
struct Checkpoint {
    std::string method;
    std::string config_text;
    std::vector<NamedTensorData> tensors;

    const NamedTensorData* find(const std::string& name) const;
    const NamedTensorData& require(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

}  // namespace sslvit
