#include "fhproxy/feature_store.hpp"

#include "fhproxy/errors.hpp"
#include "fhproxy/numkit.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

namespace fhproxy {
namespace {

constexpr char kMagic[4] = {'F', 'H', 'S', 'T'};
constexpr uint32_t kVersion = 1;

class LeWriter {
public:
    explicit LeWriter(std::ostream& out) : out_(out) {}

    void u32(uint32_t v) {
        unsigned char buf[4];
        buf[0] = static_cast<unsigned char>(v);
        buf[1] = static_cast<unsigned char>(v >> 8);
        buf[2] = static_cast<unsigned char>(v >> 16);
        buf[3] = static_cast<unsigned char>(v >> 24);
        out_.write(reinterpret_cast<const char*>(buf), 4);
    }

    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }

    void f32_array(const float* data, size_t count) {
        if constexpr (std::endian::native == std::endian::little) {
            out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
        } else {
            for (size_t i = 0; i < count; ++i) f32(data[i]);
        }
    }

    void u32_array(const uint32_t* data, size_t count) {
        if constexpr (std::endian::native == std::endian::little) {
            out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 4));
        } else {
            for (size_t i = 0; i < count; ++i) u32(data[i]);
        }
    }

private:
    std::ostream& out_;
};

// Tracks the byte offset so truncation and corruption errors can name it.
class LeReader {
public:
    LeReader(std::istream& in, const std::string& path) : in_(in), path_(path) {}

    uint64_t offset() const { return offset_; }

    uint32_t u32(const char* what) {
        unsigned char buf[4];
        read(buf, 4, what);
        return static_cast<uint32_t>(buf[0]) | static_cast<uint32_t>(buf[1]) << 8 |
               static_cast<uint32_t>(buf[2]) << 16 | static_cast<uint32_t>(buf[3]) << 24;
    }

    float f32(const char* what) {
        const uint32_t bits = u32(what);
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    void f32_array(float* data, size_t count, const char* what) {
        if constexpr (std::endian::native == std::endian::little) {
            read(data, count * 4, what);
        } else {
            for (size_t i = 0; i < count; ++i) data[i] = f32(what);
        }
    }

    void u32_array(uint32_t* data, size_t count, const char* what) {
        if constexpr (std::endian::native == std::endian::little) {
            read(data, count * 4, what);
        } else {
            for (size_t i = 0; i < count; ++i) data[i] = u32(what);
        }
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    void read(void* dst, size_t bytes, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(bytes));
        if (static_cast<size_t>(in_.gcount()) != bytes) {
            throw FormatError(path_ + ": truncated while reading " + what + " at byte offset " +
                              std::to_string(offset_));
        }
        offset_ += bytes;
    }

    std::istream& in_;
    std::string path_;
    uint64_t offset_ = 0;
};

} // namespace

void FeatureHistory::validate() const {
    if (y_train.size() != n_train || y_val.size() != n_val)
        throw InvalidInputError("FeatureHistory: label vector sizes disagree with counts");
    for (uint32_t y : y_train)
        if (y >= c) throw InvalidInputError("FeatureHistory: train label out of range");
    for (uint32_t y : y_val)
        if (y >= c) throw InvalidInputError("FeatureHistory: val label out of range");

    uint32_t prev = 0;
    for (size_t i = 0; i < epochs.size(); ++i) {
        const EpochRecord& rec = epochs[i];
        if (i == 0 && rec.epoch < 1)
            throw InvalidInputError("FeatureHistory: epoch indices start at 1");
        if (rec.epoch <= prev)
            throw InvalidInputError("FeatureHistory: epoch indices must be strictly increasing");
        prev = rec.epoch;
        require_shape(rec.h_train, n_train, d, "FeatureHistory h_train");
        require_shape(rec.h_val, n_val, d, "FeatureHistory h_val");
        require_shape(rec.cls_weight, c, d, "FeatureHistory cls_weight");
        require_shape(rec.cls_bias, 1, c, "FeatureHistory cls_bias");
    }
}

const EpochRecord* FeatureHistory::find_epoch(uint32_t epoch) const {
    for (const auto& rec : epochs)
        if (rec.epoch == epoch) return &rec;
    return nullptr;
}

uint64_t fhst_header_bytes(uint32_t n_train, uint32_t n_val) {
    return 4 + 4 + 4 * 4 + 4ull * n_train + 4ull * n_val;
}

uint64_t fhst_block_bytes(uint32_t n_train, uint32_t n_val, uint32_t d, uint32_t c) {
    return 4 + 4 + 4ull * (static_cast<uint64_t>(n_train) * d + static_cast<uint64_t>(n_val) * d +
                           static_cast<uint64_t>(c) * d + c);
}

void write_history(const std::filesystem::path& path, const FeatureHistory& history) {
    history.validate();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("write_history: cannot open " + path.string());

    LeWriter w(out);
    out.write(kMagic, 4);
    w.u32(kVersion);
    w.u32(history.n_train);
    w.u32(history.n_val);
    w.u32(history.d);
    w.u32(history.c);
    w.u32_array(history.y_train.data(), history.y_train.size());
    w.u32_array(history.y_val.data(), history.y_val.size());

    for (const EpochRecord& rec : history.epochs) {
        w.u32(rec.epoch);
        w.f32(rec.raw_val_accuracy);
        w.f32_array(rec.h_train.data(), rec.h_train.size());
        w.f32_array(rec.h_val.data(), rec.h_val.size());
        w.f32_array(rec.cls_weight.data(), rec.cls_weight.size());
        w.f32_array(rec.cls_bias.data(), rec.cls_bias.size());
    }

    out.flush();
    if (!out) throw StorageError("write_history: I/O failure writing " + path.string());
}

FeatureHistory read_history(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("read_history: cannot open " + path.string());

    LeReader r(in, path.string());
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(path.string() + ": bad magic at byte offset 0");

    FeatureHistory h;
    const uint32_t version = r.u32("version");
    if (version != kVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version) +
                          " at byte offset 4");
    h.n_train = r.u32("n_train");
    h.n_val = r.u32("n_val");
    h.d = r.u32("d");
    h.c = r.u32("c");
    if (h.d == 0 || h.c == 0)
        throw FormatError(path.string() + ": zero feature or class dimension in header");

    h.y_train.resize(h.n_train);
    r.u32_array(h.y_train.data(), h.n_train, "y_train");
    h.y_val.resize(h.n_val);
    r.u32_array(h.y_val.data(), h.n_val, "y_val");

    while (!r.at_eof()) {
        EpochRecord rec;
        rec.epoch = r.u32("epoch");
        rec.raw_val_accuracy = r.f32("raw_val_accuracy");
        rec.h_train = Matrix(h.n_train, h.d);
        r.f32_array(rec.h_train.data(), rec.h_train.size(), "h_train");
        rec.h_val = Matrix(h.n_val, h.d);
        r.f32_array(rec.h_val.data(), rec.h_val.size(), "h_val");
        rec.cls_weight = Matrix(h.c, h.d);
        r.f32_array(rec.cls_weight.data(), rec.cls_weight.size(), "cls_weight");
        rec.cls_bias = Matrix(1, h.c);
        r.f32_array(rec.cls_bias.data(), rec.cls_bias.size(), "cls_bias");
        h.epochs.push_back(std::move(rec));
    }

    try {
        h.validate();
    } catch (const InvalidInputError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return h;
}

std::vector<const EpochRecord*> window(const FeatureHistory& history, uint32_t end_epoch,
                                       uint32_t k) {
    if (k < 1) throw InvalidInputError("window: k must be >= 1");
    if (!history.find_epoch(end_epoch))
        throw InvalidInputError("window: end_epoch " + std::to_string(end_epoch) +
                                " not present in history");

    const uint32_t lo = end_epoch >= k ? end_epoch - k + 1 : 1;
    std::vector<const EpochRecord*> out;
    for (const auto& rec : history.epochs)
        if (rec.epoch >= lo && rec.epoch <= end_epoch) out.push_back(&rec);
    return out;
}

} // namespace fhproxy
