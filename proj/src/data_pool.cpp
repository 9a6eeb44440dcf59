#include "deal/data_pool.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "deal/errors.hpp"
#include "deal/png_io.hpp"

namespace deal {

void validate_sample(const SegSample& sample, int num_classes, int ignore_label)
{
    if (sample.image.channels() != 3)
        throw ShapeError("sample " + sample.id + ": image must have 3 channels");
    if (sample.label.rows() != sample.image.height || sample.label.cols() != sample.image.width)
        throw ShapeError("sample " + sample.id + ": image and label sizes differ");
    for (Eigen::Index k = 0; k < sample.label.size(); ++k) {
        const int v = sample.label.data()[k];
        if (v != ignore_label && (v < 0 || v >= num_classes))
            throw ConfigError("sample " + sample.id + ": label value " + std::to_string(v) + " out of range");
    }
}

// ---------------------------------------------------------------------------
// DatasetConfig

int DatasetConfig::initial_count(std::size_t pool_size) const
{
    return static_cast<int>(std::lround(initial_fraction * double(pool_size)));
}

int DatasetConfig::budget_count(std::size_t pool_size) const
{
    return static_cast<int>(std::lround(budget_fraction * double(pool_size)));
}

int DatasetConfig::effective_subset_size(std::size_t pool_size) const
{
    return subset_size > 0 ? subset_size : 4 * budget_count(pool_size);
}

void DatasetConfig::validate(std::size_t pool_size) const
{
    if (num_classes < 2)
        throw ConfigError("num_classes must be >= 2");
    if (!(initial_fraction > 0.0 && initial_fraction < 1.0))
        throw ConfigError("initial_fraction must lie in (0, 1)");
    if (!(budget_fraction > 0.0 && budget_fraction < 1.0))
        throw ConfigError("budget_fraction must lie in (0, 1)");
    if (rounds < 1)
        throw ConfigError("rounds must be >= 1");
    if (subset_size < 0)
        throw ConfigError("subset_size must be >= 0");
    if (pool_size > 0) {
        if (initial_count(pool_size) < 1)
            throw ConfigError("initial_fraction yields an empty annotated set");
        if (subset_size > 0 && subset_size < budget_count(pool_size))
            throw ConfigError("subset_size must be >= budget");
    }
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

struct Rgb {
    float r, g, b;
};

class SceneBuilder {
public:
    SceneBuilder(int h, int w, std::mt19937_64& rng) : h_(h), w_(w), rng_(rng), image_(3, h, w), label_(h, w)
    {
        label_.setConstant(kBackground);
    }

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

    /// Zero with probability `p_none`, else uniform in [1, max].
    int skewed_count(double p_none, int max)
    {
        return uniform(0.0, 1.0) < p_none ? 0 : uniform_int(1, max);
    }

    void background()
    {
        const double base = uniform(0.35, 0.6);
        const Rgb tint{float(base + uniform(-0.05, 0.05)), float(base + uniform(-0.05, 0.05)),
                       float(base + uniform(-0.05, 0.05))};
        const double gy = uniform(-0.15, 0.15);
        const double gx = uniform(-0.15, 0.15);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                const double shade = gy * (double(y) / h_ - 0.5) + gx * (double(x) / w_ - 0.5);
                put(y, x, {float(tint.r + shade), float(tint.g + shade), float(tint.b + shade)});
            }
    }

    void blob()
    {
        const double cy = uniform(0, h_);
        const double cx = uniform(0, w_);
        const double scale = std::min(h_, w_);
        const double ry = uniform(0.08, 0.22) * scale;
        const double rx = uniform(0.08, 0.22) * scale;
        const Rgb color = blob_color();
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                const double dy = (y - cy) / ry;
                const double dx = (x - cx) / rx;
                if (dy * dy + dx * dx <= 1.0)
                    paint(y, x, color, kBlob);
            }
    }

    void line()
    {
        const double half_width = uniform_int(1, 2) * 0.5;
        double y0, x0, y1, x1;
        do {
            y0 = uniform(0, h_);
            x0 = uniform(0, w_);
            y1 = uniform(0, h_);
            x1 = uniform(0, w_);
        } while (std::hypot(y1 - y0, x1 - x0) < std::min(h_, w_) / 3.0);
        // lines share the blob palette, shifted slightly toward yellow
        Rgb color = blob_color();
        color.g = float(std::min(1.0, color.g + uniform(0.1, 0.25)));
        const double len2 = (y1 - y0) * (y1 - y0) + (x1 - x0) * (x1 - x0);
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                const double py = y + 0.5;
                const double px = x + 0.5;
                const double t = std::clamp(((py - y0) * (y1 - y0) + (px - x0) * (x1 - x0)) / len2, 0.0, 1.0);
                const double d = std::hypot(py - (y0 + t * (y1 - y0)), px - (x0 + t * (x1 - x0)));
                if (d <= half_width)
                    paint(y, x, color, kThinLine);
            }
    }

    void square()
    {
        const int side = uniform_int(2, 5);
        const int y0 = uniform_int(0, h_ - side);
        const int x0 = uniform_int(0, w_ - side);
        const double v = uniform(0.2, 0.45);
        const Rgb color{float(v), float(v + uniform(0.0, 0.15)), float(v + uniform(0.2, 0.4))};
        for (int y = y0; y < y0 + side; ++y)
            for (int x = x0; x < x0 + side; ++x)
                paint(y, x, color, kSmallSquare);
    }

    SegSample finish(std::string id, double noise)
    {
        std::normal_distribution<double> gauss(0.0, noise);
        for (Eigen::Index i = 0; i < image_.data.size(); ++i)
            image_.data.data()[i] = std::clamp<float>(float(image_.data.data()[i] + gauss(rng_)), 0.0f, 1.0f);
        return SegSample{std::move(id), std::move(image_), std::move(label_)};
    }

private:
    Rgb blob_color() { return {float(uniform(0.55, 0.85)), float(uniform(0.25, 0.5)), float(uniform(0.15, 0.4))}; }

    void put(int y, int x, Rgb c)
    {
        const Eigen::Index k = Eigen::Index(y) * w_ + x;
        image_.data(0, k) = c.r;
        image_.data(1, k) = c.g;
        image_.data(2, k) = c.b;
    }

    void paint(int y, int x, Rgb c, int cls)
    {
        put(y, x, c);
        label_(y, x) = cls;
    }

    int h_, w_;
    std::mt19937_64& rng_;
    FeatureMap<float> image_;
    LabelMap label_;
};

}  // namespace

std::vector<SegSample> generate_synthetic_dataset(int n, int height, int width, std::uint64_t seed,
                                                  const std::string& id_prefix)
{
    if (n < 1)
        throw ConfigError("generate_synthetic_dataset: n must be >= 1");
    if (height < 32 || width < 32)
        throw ConfigError("generate_synthetic_dataset: height and width must be >= 32");
    std::mt19937_64 rng(seed);
    std::vector<SegSample> out;
    out.reserve(static_cast<size_t>(n));
    const int digits = static_cast<int>(std::to_string(n - 1).size());
    for (int i = 0; i < n; ++i) {
        SceneBuilder scene(height, width, rng);
        scene.background();
        const int blobs = scene.uniform_int(1, 3);
        for (int b = 0; b < blobs; ++b)
            scene.blob();
        const int squares = scene.skewed_count(0.4, 6);
        for (int s = 0; s < squares; ++s)
            scene.square();
        const int lines = scene.skewed_count(0.4, 4);
        for (int l = 0; l < lines; ++l)
            scene.line();
        std::string index = std::to_string(i);
        index.insert(0, static_cast<size_t>(std::max(0, digits - int(index.size()))), '0');
        out.push_back(scene.finish(id_prefix + "_" + index, 0.08));
    }
    return out;
}

// ---------------------------------------------------------------------------
// SamplePool

SamplePool::SamplePool(std::vector<SegSample> samples)
{
    auto store = std::make_shared<std::map<std::string, SegSample>>();
    for (SegSample& s : samples) {
        std::string id = s.id;
        if (!store->emplace(id, std::move(s)).second)
            throw ConfigError("SamplePool: duplicate sample id " + id);
        unlabeled_.insert(std::move(id));
    }
    store_ = std::move(store);
}

bool SamplePool::contains(const std::string& id) const
{
    return store_ && store_->count(id) != 0;
}

const SegSample& SamplePool::lookup(const std::string& id) const
{
    if (!store_)
        throw InvalidQueryError("empty pool");
    const auto it = store_->find(id);
    if (it == store_->end())
        throw InvalidQueryError("unknown sample id " + id);
    return it->second;
}

const FeatureMap<float>& SamplePool::image(const std::string& id) const
{
    return lookup(id).image;
}

const LabelMap& SamplePool::label(const std::string& id) const
{
    return annotated_sample(id).label;
}

const SegSample& SamplePool::annotated_sample(const std::string& id) const
{
    const SegSample& s = lookup(id);
    if (!is_annotated(id))
        throw InvalidQueryError("label of unlabeled sample " + id + " is not accessible");
    return s;
}

bool SamplePool::partition_ok() const
{
    if (annotated_.size() + unlabeled_.size() != size())
        return false;
    for (const std::string& id : annotated_)
        if (unlabeled_.count(id) || !contains(id))
            return false;
    for (const std::string& id : unlabeled_)
        if (!contains(id))
            return false;
    return true;
}

SamplePool split_initial(std::vector<SegSample> samples, const DatasetConfig& cfg, std::uint64_t seed)
{
    cfg.validate(samples.size());
    const int count = cfg.initial_count(samples.size());
    if (count < 1)
        throw ConfigError("split_initial: initial_fraction yields an empty annotated set");
    for (const SegSample& s : samples)
        validate_sample(s, cfg.num_classes, cfg.ignore_label);
    SamplePool pool(std::move(samples));
    std::vector<std::string> ids(pool.unlabeled_.begin(), pool.unlabeled_.end());
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    for (int i = 0; i < count; ++i) {
        pool.unlabeled_.erase(ids[static_cast<size_t>(i)]);
        pool.annotated_.insert(ids[static_cast<size_t>(i)]);
    }
    return pool;
}

SamplePool oracle_annotate(SamplePool pool, std::span<const std::string> ids)
{
    const std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size())
        throw InvalidQueryError("oracle_annotate: duplicate ids in request");
    for (const std::string& id : ids) {
        if (!pool.contains(id))
            throw InvalidQueryError("oracle_annotate: unknown id " + id);
        if (pool.is_annotated(id))
            throw InvalidQueryError("oracle_annotate: " + id + " is already annotated");
    }
    for (const std::string& id : ids) {
        pool.unlabeled_.erase(id);
        pool.annotated_.insert(id);
    }
    return pool;
}

std::vector<std::string> presample_subset(const SamplePool& pool, int subset_size, std::uint64_t seed)
{
    if (subset_size <= 0)
        throw ConfigError("presample_subset: subset_size must be positive");
    std::vector<std::string> ids(pool.unlabeled().begin(), pool.unlabeled().end());
    if (static_cast<size_t>(subset_size) >= ids.size())
        return ids;
    std::mt19937_64 rng(seed);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<size_t>(subset_size));
    std::sort(ids.begin(), ids.end());
    return ids;
}

// ---------------------------------------------------------------------------
// Disk layout

std::vector<SegSample> load_dataset_dir(const std::filesystem::path& root)
{
    namespace fs = std::filesystem;
    const fs::path images = root / "images";
    const fs::path labels = root / "labels";
    if (!fs::is_directory(images) || !fs::is_directory(labels))
        throw IoError("dataset root " + root.string() + " needs images/ and labels/ subdirectories");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    std::vector<SegSample> out;
    out.reserve(files.size());
    for (const fs::path& file : files) {
        const std::string id = file.stem().string();
        const png::Image8 rgb = png::read(file);
        const png::Image8 lab = png::read(labels / (id + ".png"));
        if (lab.channels != 1)
            throw IoError("label map " + id + " must be single-channel");
        if (lab.width != rgb.width || lab.height != rgb.height)
            throw ShapeError("image and label sizes differ for " + id);
        SegSample s{id, FeatureMap<float>(3, rgb.height, rgb.width), LabelMap(rgb.height, rgb.width)};
        const Eigen::Index pixels = Eigen::Index(rgb.width) * rgb.height;
        for (Eigen::Index k = 0; k < pixels; ++k) {
            for (int c = 0; c < 3; ++c) {
                const int src = rgb.channels == 3 ? c : 0;
                s.image.data(c, k) = float(rgb.pixels[static_cast<size_t>(k * rgb.channels + src)]) / 255.0f;
            }
            s.label.data()[k] = lab.pixels[static_cast<size_t>(k)];
        }
        out.push_back(std::move(s));
    }
    return out;
}

void save_dataset_dir(const std::vector<SegSample>& samples, const std::filesystem::path& root)
{
    namespace fs = std::filesystem;
    fs::create_directories(root / "images");
    fs::create_directories(root / "labels");
    for (const SegSample& s : samples) {
        png::Image8 rgb{s.width(), s.height(), 3, {}};
        png::Image8 lab{s.width(), s.height(), 1, {}};
        rgb.pixels.resize(static_cast<size_t>(s.image.pixels()) * 3);
        lab.pixels.resize(static_cast<size_t>(s.image.pixels()));
        for (Eigen::Index k = 0; k < s.image.pixels(); ++k) {
            for (int c = 0; c < 3; ++c)
                rgb.pixels[static_cast<size_t>(k * 3 + c)] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(s.image.data(c, k), 0.0f, 1.0f) * 255.0f));
            const int v = s.label.data()[k];
            if (v < 0 || v > 255)
                throw IoError("label value does not fit an 8-bit map in " + s.id);
            lab.pixels[static_cast<size_t>(k)] = static_cast<std::uint8_t>(v);
        }
        png::write(root / "images" / (s.id + ".png"), rgb);
        png::write(root / "labels" / (s.id + ".png"), lab);
    }
}

}  // namespace deal
