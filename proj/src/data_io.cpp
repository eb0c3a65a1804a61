#include "sslvit/data_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "sslvit/error.hpp"

namespace fs = std::filesystem;

namespace sslvit {

static_assert(std::numeric_limits<float>::is_iec559, "requires IEEE-754 float");

// ---- PPM / PGM ----

namespace {

struct ByteReader {
    std::vector<std::uint8_t> bytes;
    std::size_t pos = 0;

    explicit ByteReader(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ParseError("cannot open " + path, 0);
        bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    int peek() const { return pos < bytes.size() ? bytes[pos] : -1; }
    int get() { return pos < bytes.size() ? bytes[pos++] : -1; }

    void skip_space_and_comments() {
        while (pos < bytes.size()) {
            int c = peek();
            if (c == '#') {
                while (pos < bytes.size() && get() != '\n') {
                }
            } else if (std::isspace(c)) {
                ++pos;
            } else {
                break;
            }
        }
    }

    unsigned read_uint(const char* what) {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(peek())) {
            throw ParseError(std::string("expected ") + what, pos);
        }
        unsigned long v = 0;
        while (pos < bytes.size() && std::isdigit(peek())) {
            v = v * 10 + unsigned(get() - '0');
            if (v > 1u << 24) throw ParseError(std::string(what) + " out of range", pos);
        }
        return unsigned(v);
    }
};

}  // namespace

Image load_ppm(const std::string& path) {
    ByteReader r(path);
    if (r.get() != 'P' || r.get() != '6') {
        throw ParseError("not a binary PPM (P6) file: " + path, 0);
    }
    unsigned w = r.read_uint("width");
    unsigned h = r.read_uint("height");
    unsigned maxval = r.read_uint("maxval");
    if (w == 0 || h == 0) throw ParseError("zero image dimension", r.pos);
    if (maxval != 255) throw ParseError("only maxval 255 supported", r.pos);
    if (r.get() < 0) throw ParseError("missing payload", r.pos);

    std::size_t need = std::size_t(w) * h * 3;
    if (r.bytes.size() - r.pos < need) {
        throw ParseError("truncated pixel payload", r.bytes.size());
    }
    Image img(h, w);
    const std::uint8_t* p = r.bytes.data() + r.pos;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img.at(c, y, x) = float(p[(y * w + x) * 3 + c]) / 255.0f;
    return img;
}

namespace {

std::uint8_t to_byte(float v) {
    float scaled = v * 255.0f + 0.5f;
    if (scaled < 0.0f) scaled = 0.0f;
    if (scaled > 255.0f) scaled = 255.0f;
    return std::uint8_t(scaled);
}

void write_file_atomic(const std::string& path, const std::string& payload) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out.write(payload.data(), std::streamsize(payload.size()));
        if (!out) throw Error("short write to " + tmp);
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error("cannot rename " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace

void save_ppm(const Image& img, const std::string& path) {
    std::string payload = "P6\n" + std::to_string(img.width) + " " +
                          std::to_string(img.height) + "\n255\n";
    payload.reserve(payload.size() + img.width * img.height * 3);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                payload.push_back(char(to_byte(img.at(c, y, x))));
    write_file_atomic(path, payload);
}

void save_pgm(const std::vector<float>& values, std::size_t height, std::size_t width,
              const std::string& path, bool normalize) {
    if (values.size() != height * width) {
        throw ShapeError("save_pgm: value count does not match dimensions");
    }
    float lo = 0.0f, hi = 1.0f;
    if (normalize && !values.empty()) {
        lo = *std::min_element(values.begin(), values.end());
        hi = *std::max_element(values.begin(), values.end());
    }
    float range = hi - lo;
    std::string payload =
        "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (float v : values) {
        float t = range > 1e-12f ? (v - lo) / range : 0.0f;
        payload.push_back(char(to_byte(t)));
    }
    write_file_atomic(path, payload);
}

// ---- manifests ----

bool DatasetManifest::labeled() const {
    if (entries.empty()) return false;
    for (const auto& e : entries)
        if (!e.label) return false;
    return true;
}

std::size_t DatasetManifest::num_classes() const {
    std::set<int> seen;
    for (const auto& e : entries)
        if (e.label) seen.insert(*e.label);
    if (seen.empty()) return 0;
    int max_label = *seen.rbegin();
    if (*seen.begin() != 0 || int(seen.size()) != max_label + 1) {
        throw ManifestError("labels do not form a contiguous 0-based class set");
    }
    return seen.size();
}

DatasetManifest build_manifest(const std::string& dir,
                               const std::optional<std::string>& labels_csv) {
    if (!fs::is_directory(dir)) {
        throw ManifestError("dataset directory does not exist: " + dir);
    }
    DatasetManifest m;
    m.root = dir;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
            m.entries.push_back({entry.path().filename().string(), std::nullopt});
        }
    }
    std::sort(m.entries.begin(), m.entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

    if (labels_csv) {
        std::ifstream in(*labels_csv);
        if (!in) throw ManifestError("cannot open labels csv: " + *labels_csv);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto comma = line.find(',');
            if (comma == std::string::npos) {
                throw ManifestError("labels csv line " + std::to_string(lineno) +
                                    " is not `file,label`");
            }
            std::string file = line.substr(0, comma);
            int label = 0;
            try {
                label = std::stoi(line.substr(comma + 1));
            } catch (const std::exception&) {
                throw ManifestError("labels csv line " + std::to_string(lineno) +
                                    " has a non-integer label");
            }
            auto it = std::find_if(m.entries.begin(), m.entries.end(),
                                   [&](const ManifestEntry& e) { return e.path == file; });
            if (it == m.entries.end()) {
                throw ManifestError("labels csv references missing file: " + file);
            }
            it->label = label;
        }
        m.num_classes();  // validates contiguity
    }
    return m;
}

void write_manifest_csv(const DatasetManifest& manifest, const std::string& path) {
    std::string payload;
    for (const auto& e : manifest.entries) {
        payload += e.path;
        payload += ',';
        if (e.label) payload += std::to_string(*e.label);
        payload += '\n';
    }
    write_file_atomic(path, payload);
}

std::vector<Image> load_corpus(const DatasetManifest& manifest) {
    std::vector<Image> images;
    images.reserve(manifest.entries.size());
    for (const auto& e : manifest.entries) {
        images.push_back(load_ppm((fs::path(manifest.root) / e.path).string()));
    }
    return images;
}

// ---- checkpoints ----

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'D', 'T', 'W', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr const char* kConfigRecord = "__config";
constexpr const char* kMethodRecord = "__method";

void put_u32(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
    out.push_back(char((v >> 16) & 0xFF));
    out.push_back(char((v >> 24) & 0xFF));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_record(std::string& out, const std::string& name, const Shape& shape,
                const std::vector<float>& values) {
    put_u32(out, std::uint32_t(name.size()));
    out += name;
    put_u32(out, std::uint32_t(shape.size()));
    for (std::size_t d : shape) put_u32(out, std::uint32_t(d));
    for (float v : values) put_f32(out, v);
}

// Text rides in a tensor record: one byte value per float, exactly
// representable, so the container stays a plain run of tensor records.
std::vector<float> text_to_floats(const std::string& text) {
    std::vector<float> out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) out[i] = float(std::uint8_t(text[i]));
    return out;
}

std::string floats_to_text(const std::vector<float>& values) {
    std::string out(values.size(), '\0');
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = char(std::uint8_t(values[i]));
    return out;
}

struct RecordReader {
    const std::uint8_t* p;
    std::size_t len;
    std::size_t pos = 0;

    std::uint32_t u32() {
        if (len - pos < 4) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "checkpoint truncated mid-record");
        }
        std::uint32_t v = std::uint32_t(p[pos]) | std::uint32_t(p[pos + 1]) << 8 |
                          std::uint32_t(p[pos + 2]) << 16 | std::uint32_t(p[pos + 3]) << 24;
        pos += 4;
        return v;
    }

    std::string str(std::size_t n) {
        if (len - pos < n) {
            throw CheckpointError(CheckpointError::Kind::Truncated,
                                  "checkpoint truncated inside a name");
        }
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }

    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

}  // namespace

const NamedTensorData* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

const NamedTensorData& Checkpoint::require(const std::string& name) const {
    const NamedTensorData* t = find(name);
    if (!t) {
        throw CheckpointError(CheckpointError::Kind::Malformed,
                              "checkpoint is missing tensor " + name);
    }
    return *t;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string records;
    put_record(records, kMethodRecord, {ckpt.method.size()}, text_to_floats(ckpt.method));
    put_record(records, kConfigRecord, {ckpt.config_text.size()},
               text_to_floats(ckpt.config_text));
    for (const auto& t : ckpt.tensors) {
        if (numel(t.shape) != t.values.size()) {
            throw ShapeError("checkpoint tensor " + t.name + " has inconsistent shape");
        }
        put_record(records, t.name, t.shape, t.values);
    }

    std::string payload(kMagic, 4);
    put_u32(payload, kVersion);
    payload += records;
    put_u32(payload, crc32(reinterpret_cast<const std::uint8_t*>(records.data()),
                           records.size()));
    write_file_atomic(path, payload);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError(CheckpointError::Kind::Truncated, "cannot open " + path);
    }
    std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                    std::istreambuf_iterator<char>()};
    if (bytes.size() < 12) {
        throw CheckpointError(CheckpointError::Kind::Truncated, "file shorter than header");
    }
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(CheckpointError::Kind::BadMagic, "bad magic in " + path);
    }
    RecordReader header{bytes.data() + 4, bytes.size() - 4};
    std::uint32_t version = header.u32();
    if (version != kVersion) {
        throw CheckpointError(CheckpointError::Kind::BadVersion,
                              "unsupported checkpoint version " + std::to_string(version));
    }

    std::size_t records_len = bytes.size() - 12;
    const std::uint8_t* records = bytes.data() + 8;
    std::uint32_t stored_crc =
        std::uint32_t(bytes[bytes.size() - 4]) | std::uint32_t(bytes[bytes.size() - 3]) << 8 |
        std::uint32_t(bytes[bytes.size() - 2]) << 16 |
        std::uint32_t(bytes[bytes.size() - 1]) << 24;
    if (crc32(records, records_len) != stored_crc) {
        throw CheckpointError(CheckpointError::Kind::ChecksumMismatch,
                              "checkpoint payload failed CRC check");
    }

    Checkpoint ckpt;
    RecordReader r{records, records_len};
    while (r.pos < r.len) {
        std::uint32_t name_len = r.u32();
        if (name_len > 4096) {
            throw CheckpointError(CheckpointError::Kind::Malformed, "implausible name length");
        }
        std::string name = r.str(name_len);
        std::uint32_t rank = r.u32();
        if (rank > 8) {
            throw CheckpointError(CheckpointError::Kind::Malformed,
                                  "implausible tensor rank " + std::to_string(rank));
        }
        Shape shape(rank);
        std::size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            shape[i] = r.u32();
            count *= shape[i];
            if (count > (1u << 28)) {
                throw CheckpointError(CheckpointError::Kind::Malformed, "implausible tensor size");
            }
        }
        std::vector<float> values(count);
        for (std::size_t i = 0; i < count; ++i) values[i] = r.f32();

        if (name == kMethodRecord) {
            ckpt.method = floats_to_text(values);
        } else if (name == kConfigRecord) {
            ckpt.config_text = floats_to_text(values);
        } else {
            ckpt.tensors.push_back({std::move(name), std::move(shape), std::move(values)});
        }
    }
    return ckpt;
}

}  // namespace sslvit
