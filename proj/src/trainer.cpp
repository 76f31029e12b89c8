#include "fhproxy/trainer.hpp"

#include "fhproxy/errors.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

namespace fhproxy {
namespace {

// Warp constants: centers are spread kCenterScale apart per coordinate, and
// each coordinate of the rotated latent point is mixed as u + a*u^3 with a
// drawn once per coordinate from [kCubicLo, kCubicHi].
constexpr double kCenterScale = 1.0;
constexpr double kCubicLo = 0.15;
constexpr double kCubicHi = 0.55;

// Random orthogonal matrix via Gram-Schmidt on a Gaussian square matrix.
std::vector<double> random_rotation(uint32_t dim, Rng& rng) {
    std::vector<double> m(static_cast<size_t>(dim) * dim);
    for (auto& v : m) v = rng.normal();
    // Orthonormalize rows.
    for (uint32_t i = 0; i < dim; ++i) {
        double* ri = m.data() + static_cast<size_t>(i) * dim;
        for (uint32_t j = 0; j < i; ++j) {
            const double* rj = m.data() + static_cast<size_t>(j) * dim;
            double dot = 0.0;
            for (uint32_t t = 0; t < dim; ++t) dot += ri[t] * rj[t];
            for (uint32_t t = 0; t < dim; ++t) ri[t] -= dot * rj[t];
        }
        double norm = 0.0;
        for (uint32_t t = 0; t < dim; ++t) norm += ri[t] * ri[t];
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw InvalidInputError("random_rotation: degenerate draw");
        for (uint32_t t = 0; t < dim; ++t) ri[t] /= norm;
    }
    return m;
}

void apply_rotation(const std::vector<double>& rot, std::span<const double> in,
                    std::span<double> out, uint32_t dim) {
    for (uint32_t i = 0; i < dim; ++i) {
        const double* ri = rot.data() + static_cast<size_t>(i) * dim;
        double acc = 0.0;
        for (uint32_t j = 0; j < dim; ++j) acc += ri[j] * in[j];
        out[i] = acc;
    }
}

void relu_inplace(Matrix& m) {
    float* p = m.data();
    for (size_t i = 0; i < m.size(); ++i) p[i] = p[i] > 0.0f ? p[i] : 0.0f;
}

// grad *= (activation > 0), both post-rectifier.
void relu_backward_inplace(Matrix& grad, const Matrix& activation) {
    float* g = grad.data();
    const float* a = activation.data();
    for (size_t i = 0; i < grad.size(); ++i)
        if (a[i] <= 0.0f) g[i] = 0.0f;
}

} // namespace

void DatasetSpec::validate() const {
    if (classes < 2) throw InvalidInputError("DatasetSpec: classes must be >= 2");
    if (n_train < classes || n_val < classes)
        throw InvalidInputError("DatasetSpec: need at least one sample per class");
    if (input_dim < 1) throw InvalidInputError("DatasetSpec: input_dim must be >= 1");
    if (!(cluster_spread >= 0.0)) throw InvalidInputError("DatasetSpec: negative spread");
    if (!(noise >= 0.0)) throw InvalidInputError("DatasetSpec: negative noise");
}

Dataset gen_dataset(const DatasetSpec& spec, Rng& rng) {
    spec.validate();
    const uint32_t dim = spec.input_dim;
    const uint32_t c = spec.classes;

    Rng warp_rng(spec.warp_seed);
    const auto rot1 = random_rotation(dim, warp_rng);
    const auto rot2 = random_rotation(dim, warp_rng);
    std::vector<double> cubic(dim);
    for (auto& a : cubic) a = warp_rng.uniform(kCubicLo, kCubicHi);

    Dataset ds;
    ds.latent_centers.resize(static_cast<size_t>(c) * dim);
    std::vector<double> centers(static_cast<size_t>(c) * dim);
    for (size_t i = 0; i < centers.size(); ++i) {
        centers[i] = kCenterScale * rng.normal();
        ds.latent_centers[i] = static_cast<float>(centers[i]);
    }

    auto fill_split = [&](uint32_t n, Matrix& x, Matrix& z, std::vector<uint32_t>& y) {
        x = Matrix(n, dim);
        z = Matrix(n, dim);
        y.resize(n);
        std::vector<double> latent(dim), warped(dim), mixed(dim);
        for (uint32_t i = 0; i < n; ++i) {
            const uint32_t label = i % c;
            y[i] = label;
            const double* center = centers.data() + static_cast<size_t>(label) * dim;
            for (uint32_t t = 0; t < dim; ++t)
                latent[t] = center[t] + spec.cluster_spread * rng.normal();
            apply_rotation(rot1, latent, warped, dim);
            for (uint32_t t = 0; t < dim; ++t)
                mixed[t] = warped[t] + cubic[t] * warped[t] * warped[t] * warped[t];
            apply_rotation(rot2, mixed, warped, dim);
            for (uint32_t t = 0; t < dim; ++t) {
                double v = warped[t];
                if (spec.noise > 0.0) v += spec.noise * rng.normal();
                x.at(i, t) = static_cast<float>(v);
                z.at(i, t) = static_cast<float>(latent[t]);
            }
        }
    };

    fill_split(spec.n_train, ds.x_train, ds.z_train, ds.y_train);
    fill_split(spec.n_val, ds.x_val, ds.z_val, ds.y_val);

    // Standardize inputs with train-split statistics (affine, invertible).
    std::vector<double> mean(dim, 0.0), var(dim, 0.0);
    for (uint32_t i = 0; i < spec.n_train; ++i)
        for (uint32_t t = 0; t < dim; ++t) mean[t] += ds.x_train.at(i, t);
    for (uint32_t t = 0; t < dim; ++t) mean[t] /= spec.n_train;
    for (uint32_t i = 0; i < spec.n_train; ++i)
        for (uint32_t t = 0; t < dim; ++t) {
            const double dv = ds.x_train.at(i, t) - mean[t];
            var[t] += dv * dv;
        }
    for (uint32_t t = 0; t < dim; ++t) var[t] = std::sqrt(var[t] / spec.n_train + 1e-8);
    auto standardize = [&](Matrix& x) {
        for (size_t i = 0; i < x.rows(); ++i)
            for (uint32_t t = 0; t < dim; ++t)
                x.at(i, t) = static_cast<float>((x.at(i, t) - mean[t]) / var[t]);
    };
    standardize(ds.x_train);
    standardize(ds.x_val);
    return ds;
}

void ModelSpec::validate() const {
    if (input_dim < 1 || feature_dim < 1 || classes < 2)
        throw InvalidInputError("ModelSpec: bad dimensions");
    for (uint32_t h : hidden_dims)
        if (h < 1) throw InvalidInputError("ModelSpec: zero hidden width");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidInputError("TrainConfig: epochs must be >= 1");
    if (batch < 1) throw InvalidInputError("TrainConfig: batch must be >= 1");
    if (!(lr0 > 0.0)) throw InvalidInputError("TrainConfig: lr0 must be > 0");
    if (schedule() < epochs)
        throw InvalidInputError("TrainConfig: schedule_epochs shorter than epochs");
    sgd.validate();
}

Matrix MlpModel::features(const Matrix& x) const {
    Matrix a = x;
    for (size_t l = 0; l < w.size(); ++l) {
        a = linear_forward(a, w[l], b[l]);
        relu_inplace(a);
    }
    return a;
}

Matrix MlpModel::logits(const Matrix& x) const {
    return linear_forward(features(x), cls_w, cls_b);
}

MlpModel init_model(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    std::vector<uint32_t> dims;
    dims.push_back(spec.input_dim);
    for (uint32_t h : spec.hidden_dims) dims.push_back(h);
    dims.push_back(spec.feature_dim);

    MlpModel m;
    m.spec = spec;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix weight(dims[l + 1], dims[l]);
        const double std_dev = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (size_t i = 0; i < weight.size(); ++i)
            weight.data()[i] = static_cast<float>(std_dev * rng.normal());
        m.w.push_back(std::move(weight));
        m.b.emplace_back(1, dims[l + 1]);
    }
    m.cls_w = Matrix(spec.classes, spec.feature_dim);
    const double std_dev = std::sqrt(2.0 / static_cast<double>(spec.feature_dim));
    for (size_t i = 0; i < m.cls_w.size(); ++i)
        m.cls_w.data()[i] = static_cast<float>(std_dev * rng.normal());
    m.cls_b = Matrix(1, spec.classes);
    return m;
}

double evaluate(const MlpModel& model, const Matrix& x, std::span<const uint32_t> y) {
    return top1_accuracy(softmax(model.logits(x)), y);
}

Trainer::Trainer(const ModelSpec& model_spec, const Dataset& data, const TrainConfig& cfg)
    : data_(data), cfg_(cfg), rng_(cfg.seed) {
    cfg_.validate();
    model_spec.validate();
    if (model_spec.input_dim != data.x_train.cols())
        throw InvalidInputError("Trainer: model input_dim disagrees with dataset");

    model_ = init_model(model_spec, rng_);
    for (const Matrix& wm : model_.w) vw_.emplace_back(wm.rows(), wm.cols());
    for (const Matrix& bm : model_.b) vb_.emplace_back(bm.rows(), bm.cols());
    vcls_w_ = Matrix(model_.cls_w.rows(), model_.cls_w.cols());
    vcls_b_ = Matrix(model_.cls_b.rows(), model_.cls_b.cols());

    steps_per_epoch_ = (data.x_train.rows() + cfg_.batch - 1) / cfg_.batch;
    history_.n_train = static_cast<uint32_t>(data.x_train.rows());
    history_.n_val = static_cast<uint32_t>(data.x_val.rows());
    history_.d = model_spec.feature_dim;
    history_.c = model_spec.classes;
    history_.y_train = data.y_train;
    history_.y_val = data.y_val;
}

Trainer::Trainer(const TrainerState& state, const Dataset& data, FeatureHistory history)
    : data_(data), cfg_(state.config), model_{state.model_spec, state.w, state.b, state.cls_w,
                                              state.cls_b},
      vw_(state.vw), vb_(state.vb), vcls_w_(state.vcls_w), vcls_b_(state.vcls_b), rng_(0),
      epoch_(state.epoch), history_(std::move(history)) {
    cfg_.validate();
    rng_.set_state(state.rng_state);
    steps_per_epoch_ = (data.x_train.rows() + cfg_.batch - 1) / cfg_.batch;
    if (history_.epochs.size() != epoch_ ||
        (epoch_ > 0 && history_.epochs.back().epoch != epoch_))
        throw InvalidInputError("Trainer: resume history does not match state epoch");
    if (history_.n_train != data.x_train.rows() || history_.n_val != data.x_val.rows())
        throw InvalidInputError("Trainer: resume history does not match dataset");
}

void Trainer::run_to_epoch(uint32_t target_epoch) {
    if (target_epoch > cfg_.schedule())
        throw InvalidInputError("Trainer: target epoch beyond LR schedule");
    while (epoch_ < target_epoch) run_one_epoch();
}

void Trainer::run_one_epoch() {
    const auto t0 = std::chrono::steady_clock::now();

    const size_t n = data_.x_train.rows();
    const size_t in_dim = data_.x_train.cols();
    const size_t d = model_.spec.feature_dim;
    const uint64_t total_steps = static_cast<uint64_t>(cfg_.schedule()) * steps_per_epoch_;
    uint64_t step = static_cast<uint64_t>(epoch_) * steps_per_epoch_;
    ++epoch_;

    Rng epoch_rng = rng_.fork();
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    epoch_rng.shuffle(order);

    Matrix h_train(n, d);
    const size_t n_layers = model_.w.size();
    std::vector<Matrix> acts(n_layers + 1);
    std::vector<Matrix> dw(n_layers), db(n_layers);
    Matrix dcls_w, dcls_b, dfeat, dprev;
    std::vector<uint32_t> yb;
    double loss_sum = 0.0;
    const double lr_first = linear_lr(step, total_steps, cfg_.lr0);

    for (size_t start = 0; start < n; start += cfg_.batch) {
        const size_t bn = std::min<size_t>(cfg_.batch, n - start);
        Matrix xb(bn, in_dim);
        yb.resize(bn);
        for (size_t i = 0; i < bn; ++i) {
            const uint32_t src = order[start + i];
            std::copy_n(data_.x_train.data() + static_cast<size_t>(src) * in_dim, in_dim,
                        xb.data() + i * in_dim);
            yb[i] = data_.y_train[src];
        }

        acts[0] = std::move(xb);
        for (size_t l = 0; l < n_layers; ++l) {
            acts[l + 1] = linear_forward(acts[l], model_.w[l], model_.b[l]);
            relu_inplace(acts[l + 1]);
        }
        const Matrix& feats = acts[n_layers];

        // In-pass capture: feature rows land at their original sample index.
        for (size_t i = 0; i < bn; ++i)
            std::copy_n(feats.data() + i * d, d,
                        h_train.data() + static_cast<size_t>(order[start + i]) * d);

        const Matrix probs = softmax(linear_forward(feats, model_.cls_w, model_.cls_b));
        loss_sum += cross_entropy(probs, yb) * static_cast<double>(bn);

        const Matrix dlogits = softmax_xent_grad(probs, yb);
        linear_backward(feats, dlogits, dcls_w, dcls_b);
        linear_backward_input(dlogits, model_.cls_w, dfeat);

        for (size_t l = n_layers; l-- > 0;) {
            relu_backward_inplace(dfeat, acts[l + 1]);
            linear_backward(acts[l], dfeat, dw[l], db[l]);
            if (l > 0) {
                linear_backward_input(dfeat, model_.w[l], dprev);
                dfeat = std::move(dprev);
            }
        }

        const double lr = linear_lr(step, total_steps, cfg_.lr0);
        for (size_t l = 0; l < n_layers; ++l) {
            sgd_step(model_.w[l], dw[l], vw_[l], cfg_.sgd, lr);
            sgd_step(model_.b[l], db[l], vb_[l], cfg_.sgd, lr);
        }
        sgd_step(model_.cls_w, dcls_w, vcls_w_, cfg_.sgd, lr);
        sgd_step(model_.cls_b, dcls_b, vcls_b_, cfg_.sgd, lr);
        ++step;
    }

    EpochRecord rec;
    rec.epoch = epoch_;
    rec.h_train = cfg_.recompute_train_features ? model_.features(data_.x_train)
                                                : std::move(h_train);
    rec.h_val = model_.features(data_.x_val);
    const Matrix val_probs = softmax(linear_forward(rec.h_val, model_.cls_w, model_.cls_b));
    const double val_acc = top1_accuracy(val_probs, data_.y_val);
    rec.raw_val_accuracy = static_cast<float>(val_acc);
    rec.cls_weight = model_.cls_w;
    rec.cls_bias = model_.cls_b;
    history_.epochs.push_back(std::move(rec));

    log_.push_back({epoch_, loss_sum / static_cast<double>(n), val_acc, lr_first});

    const auto t1 = std::chrono::steady_clock::now();
    wall_ms_total_ += std::chrono::duration<double, std::milli>(t1 - t0).count();
    ++wall_epochs_;
}

double Trainer::mean_epoch_wall_ms() const {
    return wall_epochs_ == 0 ? 0.0 : wall_ms_total_ / wall_epochs_;
}

TrainerState Trainer::state() const {
    TrainerState st;
    st.model_spec = model_.spec;
    st.config = cfg_;
    st.epoch = epoch_;
    st.rng_state = rng_.state();
    st.w = model_.w;
    st.b = model_.b;
    st.vw = vw_;
    st.vb = vb_;
    st.cls_w = model_.cls_w;
    st.cls_b = model_.cls_b;
    st.vcls_w = vcls_w_;
    st.vcls_b = vcls_b_;
    return st;
}

FeatureHistory train_with_history(const ModelSpec& model_spec, const Dataset& data,
                                  const TrainConfig& cfg, const std::filesystem::path& out_path) {
    Trainer trainer(model_spec, data, cfg);
    trainer.run_to_epoch(cfg.epochs);
    FeatureHistory history = trainer.take_history();
    if (!out_path.empty()) write_history(out_path, history);
    return history;
}

// --- dataset file I/O ------------------------------------------------------

namespace {

constexpr char kDatasetMagic[4] = {'F', 'H', 'D', 'S'};
constexpr uint32_t kDatasetVersion = 1;

void write_u32_le(std::ostream& out, uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

uint32_t read_u32_le(std::istream& in, const std::string& path, uint64_t& offset,
                     const char* what) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (in.gcount() != 4)
        throw FormatError(path + ": truncated while reading " + what + " at byte offset " +
                          std::to_string(offset));
    offset += 4;
    return static_cast<uint32_t>(buf[0]) | static_cast<uint32_t>(buf[1]) << 8 |
           static_cast<uint32_t>(buf[2]) << 16 | static_cast<uint32_t>(buf[3]) << 24;
}

void write_block(std::ostream& out, const void* data, size_t bytes) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_block(std::istream& in, void* data, size_t bytes, const std::string& path,
                uint64_t& offset, const char* what) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(in.gcount()) != bytes)
        throw FormatError(path + ": truncated while reading " + what + " at byte offset " +
                          std::to_string(offset));
    offset += bytes;
}

} // namespace

uint64_t fhds_bytes(uint32_t n_train, uint32_t n_val, uint32_t input_dim) {
    return 4 + 5 * 4 +
           4ull * (static_cast<uint64_t>(n_train) * input_dim + n_train +
                   static_cast<uint64_t>(n_val) * input_dim + n_val);
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    static_assert(std::endian::native == std::endian::little,
                  "FHDS writer assumes a little-endian host");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("write_dataset: cannot open " + path.string());

    out.write(kDatasetMagic, 4);
    write_u32_le(out, kDatasetVersion);
    write_u32_le(out, static_cast<uint32_t>(data.x_train.rows()));
    write_u32_le(out, static_cast<uint32_t>(data.x_val.rows()));
    write_u32_le(out, static_cast<uint32_t>(data.x_train.cols()));
    uint32_t classes = 0;
    for (uint32_t y : data.y_train) classes = std::max(classes, y + 1);
    for (uint32_t y : data.y_val) classes = std::max(classes, y + 1);
    write_u32_le(out, classes);
    write_block(out, data.x_train.data(), data.x_train.size() * 4);
    write_block(out, data.y_train.data(), data.y_train.size() * 4);
    write_block(out, data.x_val.data(), data.x_val.size() * 4);
    write_block(out, data.y_val.data(), data.y_val.size() * 4);
    if (!out) throw StorageError("write_dataset: I/O failure writing " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    static_assert(std::endian::native == std::endian::little,
                  "FHDS reader assumes a little-endian host");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("read_dataset: cannot open " + path.string());

    uint64_t offset = 0;
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kDatasetMagic, 4) != 0)
        throw FormatError(path.string() + ": bad magic at byte offset 0");
    offset += 4;

    const uint32_t version = read_u32_le(in, path.string(), offset, "version");
    if (version != kDatasetVersion)
        throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    const uint32_t n_train = read_u32_le(in, path.string(), offset, "n_train");
    const uint32_t n_val = read_u32_le(in, path.string(), offset, "n_val");
    const uint32_t dim = read_u32_le(in, path.string(), offset, "input_dim");
    read_u32_le(in, path.string(), offset, "classes");

    Dataset ds;
    ds.x_train = Matrix(n_train, dim);
    read_block(in, ds.x_train.data(), ds.x_train.size() * 4, path.string(), offset, "x_train");
    ds.y_train.resize(n_train);
    read_block(in, ds.y_train.data(), 4ull * n_train, path.string(), offset, "y_train");
    ds.x_val = Matrix(n_val, dim);
    read_block(in, ds.x_val.data(), ds.x_val.size() * 4, path.string(), offset, "x_val");
    ds.y_val.resize(n_val);
    read_block(in, ds.y_val.data(), 4ull * n_val, path.string(), offset, "y_val");
    return ds;
}

// --- trainer checkpoint serialization -------------------------------------

namespace {

constexpr char kStateMagic[4] = {'F', 'H', 'C', 'P'};
constexpr uint32_t kStateVersion = 1;

void put_u32(std::vector<std::byte>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>(v >> (8 * i) & 0xFF));
}

void put_u64(std::vector<std::byte>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::byte>(v >> (8 * i) & 0xFF));
}

void put_f32(std::vector<std::byte>& out, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

void put_f64(std::vector<std::byte>& out, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

void put_matrix(std::vector<std::byte>& out, const Matrix& m) {
    put_u32(out, static_cast<uint32_t>(m.rows()));
    put_u32(out, static_cast<uint32_t>(m.cols()));
    for (size_t i = 0; i < m.size(); ++i) put_f32(out, m.data()[i]);
}

class StateReader {
public:
    explicit StateReader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }

    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }

    double f64() {
        const uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    Matrix matrix() {
        const uint32_t rows = u32();
        const uint32_t cols = u32();
        Matrix m(rows, cols);
        for (size_t i = 0; i < m.size(); ++i) m.data()[i] = f32();
        return m;
    }

    size_t pos() const { return pos_; }

private:
    void need(size_t n) {
        if (pos_ + n > bytes_.size())
            throw FormatError("trainer checkpoint truncated at byte offset " +
                              std::to_string(pos_));
    }

    std::span<const std::byte> bytes_;
    size_t pos_ = 0;
};

} // namespace

std::vector<std::byte> serialize_state(const TrainerState& state) {
    std::vector<std::byte> out;
    for (char ch : kStateMagic) out.push_back(static_cast<std::byte>(ch));
    put_u32(out, kStateVersion);

    put_u32(out, state.model_spec.input_dim);
    put_u32(out, static_cast<uint32_t>(state.model_spec.hidden_dims.size()));
    for (uint32_t h : state.model_spec.hidden_dims) put_u32(out, h);
    put_u32(out, state.model_spec.feature_dim);
    put_u32(out, state.model_spec.classes);

    put_u32(out, state.config.epochs);
    put_u32(out, state.config.batch);
    put_f64(out, state.config.lr0);
    put_f32(out, state.config.sgd.learning_rate);
    put_f32(out, state.config.sgd.momentum);
    put_f32(out, state.config.sgd.weight_decay);
    put_u64(out, state.config.seed);
    put_u32(out, state.config.schedule_epochs);
    put_u32(out, state.config.recompute_train_features ? 1 : 0);

    put_u32(out, state.epoch);
    for (uint64_t wrd : state.rng_state) put_u64(out, wrd);

    put_u32(out, static_cast<uint32_t>(state.w.size()));
    for (size_t l = 0; l < state.w.size(); ++l) {
        put_matrix(out, state.w[l]);
        put_matrix(out, state.b[l]);
        put_matrix(out, state.vw[l]);
        put_matrix(out, state.vb[l]);
    }
    put_matrix(out, state.cls_w);
    put_matrix(out, state.cls_b);
    put_matrix(out, state.vcls_w);
    put_matrix(out, state.vcls_b);
    return out;
}

TrainerState deserialize_state(std::span<const std::byte> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kStateMagic, 4) != 0)
        throw FormatError("trainer checkpoint: bad magic at byte offset 0");
    StateReader r(bytes.subspan(4));
    const uint32_t version = r.u32();
    if (version != kStateVersion)
        throw FormatError("trainer checkpoint: unsupported version " + std::to_string(version));

    TrainerState st;
    st.model_spec.input_dim = r.u32();
    st.model_spec.hidden_dims.resize(r.u32());
    for (auto& h : st.model_spec.hidden_dims) h = r.u32();
    st.model_spec.feature_dim = r.u32();
    st.model_spec.classes = r.u32();

    st.config.epochs = r.u32();
    st.config.batch = r.u32();
    st.config.lr0 = r.f64();
    st.config.sgd.learning_rate = r.f32();
    st.config.sgd.momentum = r.f32();
    st.config.sgd.weight_decay = r.f32();
    st.config.seed = r.u64();
    st.config.schedule_epochs = r.u32();
    st.config.recompute_train_features = r.u32() != 0;

    st.epoch = r.u32();
    for (auto& wrd : st.rng_state) wrd = r.u64();

    const uint32_t n_layers = r.u32();
    for (uint32_t l = 0; l < n_layers; ++l) {
        st.w.push_back(r.matrix());
        st.b.push_back(r.matrix());
        st.vw.push_back(r.matrix());
        st.vb.push_back(r.matrix());
    }
    st.cls_w = r.matrix();
    st.cls_b = r.matrix();
    st.vcls_w = r.matrix();
    st.vcls_b = r.matrix();
    return st;
}

void save_state(const std::filesystem::path& path, const TrainerState& state) {
    const auto bytes = serialize_state(state);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("save_state: cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StorageError("save_state: I/O failure writing " + path.string());
}

TrainerState load_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("load_state: cannot open " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_state(
        std::span<const std::byte>(reinterpret_cast<const std::byte*>(raw.data()), raw.size()));
}

} // namespace fhproxy
