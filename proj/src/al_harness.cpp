#include "deal/al_harness.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>

#include <json.hpp>

namespace deal {

using nlohmann::json;

// ---------------------------------------------------------------------------
// strategies

namespace {

const std::vector<std::pair<Strategy, std::string>>& strategy_table()
{
    static const std::vector<std::pair<Strategy, std::string>> table{
        {Strategy::random, "random"},       {Strategy::entropy, "entropy"},
        {Strategy::lc, "lc"},               {Strategy::margin, "margin"},
        {Strategy::ds, "ds"},               {Strategy::de, "de"},
        {Strategy::qbc_entropy, "qbc-entropy"}, {Strategy::qbc_vr, "qbc-vr"},
        {Strategy::coreset, "coreset"},
    };
    return table;
}

}  // namespace

Strategy parse_strategy(const std::string& name)
{
    for (const auto& [s, n] : strategy_table())
        if (n == name)
            return s;
    throw ConfigError("unknown strategy '" + name + "'");
}

std::string to_string(Strategy strategy)
{
    for (const auto& [s, n] : strategy_table())
        if (s == strategy)
            return n;
    return "?";
}

const std::vector<std::string>& strategy_names()
{
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& entry : strategy_table())
            out.push_back(entry.second);
        return out;
    }();
    return names;
}

bool uses_difficulty(Strategy strategy)
{
    return strategy == Strategy::ds || strategy == Strategy::de;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t round, std::uint64_t purpose)
{
    // splitmix64 finalizer over a mixed key
    std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + round * 0xBF58476D1CE4E5B9ull + purpose * 0x94D049BB133111EBull +
                      0x632BE59BD9B4E019ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// configuration

int ALConfig::budget_for(std::size_t pool_size) const
{
    return budget >= 0 ? budget : data.budget_count(pool_size);
}

int ALConfig::subset_for(std::size_t pool_size) const
{
    return data.subset_size > 0 ? data.subset_size : 4 * budget_for(pool_size);
}

void ALConfig::validate() const
{
    data.validate(0);
    model.validate();
    if (budget < -1)
        throw ConfigError("budget must be >= 0 (or -1 to derive it from budget_fraction)");
    if (levels < 2)
        throw ConfigError("levels must be >= 2");
    if (mc_passes < 2)
        throw ConfigError("mc_passes must be >= 2");
    if (seeds.empty())
        throw ConfigError("at least one seed is required");
    if (train.batch_size < 1 || train.epochs < 1 || train.iterations < 0)
        throw ConfigError("training schedule must be positive");
    if (!(train.learning_rate > 0.0))
        throw ConfigError("lr must be positive");
    if (model.net.classes != data.num_classes)
        throw ConfigError("model classes and num_classes disagree");
    if (dataset_root.empty()) {
        if (data.num_classes != kSyntheticClasses)
            throw ConfigError("synthetic scenes have exactly 4 classes");
        if (synthetic_train < 1 || synthetic_test < 1)
            throw ConfigError("synthetic split sizes must be positive");
    }
}

const std::set<std::string>& al_config_keys()
{
    static const std::set<std::string> keys{
        "dataset_root", "synthetic_train", "synthetic_test", "image_height", "image_width", "data_seed",
        "num_classes", "ignore_label", "initial_fraction", "budget_fraction", "budget", "rounds",
        "subset_size", "strategy", "seeds", "levels", "uncertainty", "mc_passes", "lr", "momentum",
        "weight_decay", "poly_power", "epochs", "iterations", "batch_size", "dropout", "widths", "input_mean", "input_std", "alpha",
        "clamp_epsilon", "pam_enabled", "attention_height", "attention_width", "stop_gradient_to_seg",
    };
    return keys;
}

ALConfig al_config_from(const KeyValueConfig& kv)
{
    kv.require_known(al_config_keys());
    ALConfig cfg;
    cfg.dataset_root = kv.get_string("dataset_root", cfg.dataset_root);
    cfg.synthetic_train = kv.get_int("synthetic_train", cfg.synthetic_train);
    cfg.synthetic_test = kv.get_int("synthetic_test", cfg.synthetic_test);
    cfg.image_height = kv.get_int("image_height", cfg.image_height);
    cfg.image_width = kv.get_int("image_width", cfg.image_width);
    cfg.data_seed = static_cast<std::uint64_t>(kv.get_int_list("data_seed", {static_cast<long long>(cfg.data_seed)}).at(0));

    cfg.data.num_classes = kv.get_int("num_classes", cfg.data.num_classes);
    cfg.data.ignore_label = kv.get_int("ignore_label", cfg.data.ignore_label);
    cfg.data.initial_fraction = kv.get_double("initial_fraction", cfg.data.initial_fraction);
    cfg.data.budget_fraction = kv.get_double("budget_fraction", cfg.data.budget_fraction);
    cfg.data.rounds = kv.get_int("rounds", cfg.data.rounds);
    cfg.data.subset_size = kv.get_int("subset_size", cfg.data.subset_size);
    cfg.budget = kv.get_int("budget", cfg.budget);

    cfg.strategy = parse_strategy(kv.get_string("strategy", to_string(cfg.strategy)));
    cfg.seeds.clear();
    for (long long s : kv.get_int_list("seeds", {0}))
        cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    cfg.levels = kv.get_int("levels", cfg.levels);
    cfg.uncertainty = parse_uncertainty(kv.get_string("uncertainty", to_string(cfg.uncertainty)));
    cfg.mc_passes = kv.get_int("mc_passes", cfg.mc_passes);

    cfg.train.learning_rate = kv.get_double("lr", cfg.train.learning_rate);
    cfg.train.momentum = kv.get_double("momentum", cfg.train.momentum);
    cfg.train.weight_decay = kv.get_double("weight_decay", cfg.train.weight_decay);
    cfg.train.poly_power = kv.get_double("poly_power", cfg.train.poly_power);
    cfg.train.epochs = kv.get_int("epochs", cfg.train.epochs);
    cfg.train.iterations = kv.get_int("iterations", cfg.train.iterations);
    cfg.train.batch_size = kv.get_int("batch_size", cfg.train.batch_size);

    cfg.model.net.classes = cfg.data.num_classes;
    cfg.model.net.dropout = kv.get_double("dropout", cfg.model.net.dropout);
    const auto widths = kv.get_int_list("widths", {cfg.model.net.widths[0], cfg.model.net.widths[1],
                                                   cfg.model.net.widths[2]});
    if (widths.size() != 3)
        throw ConfigError("widths needs exactly 3 entries");
    for (size_t i = 0; i < 3; ++i)
        cfg.model.net.widths[i] = static_cast<int>(widths[i]);
    cfg.model.net.input_mean = kv.get_double("input_mean", cfg.model.net.input_mean);
    cfg.model.net.input_std = kv.get_double("input_std", cfg.model.net.input_std);
    cfg.model.alpha = kv.get_double("alpha", cfg.model.alpha);
    cfg.model.clamp = kv.get_double("clamp_epsilon", cfg.model.clamp);
    cfg.model.pam_enabled = kv.get_bool("pam_enabled", cfg.model.pam_enabled);
    cfg.model.attention_height = kv.get_int("attention_height", cfg.model.attention_height);
    cfg.model.attention_width = kv.get_int("attention_width", cfg.model.attention_width);
    cfg.model.stop_gradient_to_seg = kv.get_bool("stop_gradient_to_seg", cfg.model.stop_gradient_to_seg);
    cfg.model.ignore_label = cfg.data.ignore_label;
    cfg.validate();
    return cfg;
}

Dataset load_dataset(const ALConfig& cfg)
{
    Dataset ds;
    if (!cfg.dataset_root.empty()) {
        const std::filesystem::path root(cfg.dataset_root);
        ds.train = load_dataset_dir(root / "train");
        ds.test = load_dataset_dir(root / "test");
    } else {
        ds.train = generate_synthetic_dataset(cfg.synthetic_train, cfg.image_height, cfg.image_width, cfg.data_seed,
                                              "train");
        ds.test = generate_synthetic_dataset(cfg.synthetic_test, cfg.image_height, cfg.image_width,
                                             derive_seed(cfg.data_seed, 0, 1), "test");
    }
    for (const SegSample& s : ds.test)
        validate_sample(s, cfg.data.num_classes, cfg.data.ignore_label);
    return ds;
}

// ---------------------------------------------------------------------------
// metrics

EvalResult evaluate_predictions(const std::vector<LabelMap>& predictions, const std::vector<LabelMap>& truths,
                                int num_classes, int ignore_label)
{
    if (predictions.size() != truths.size())
        throw ShapeError("evaluate: prediction and ground-truth counts differ");
    if (truths.empty())
        throw ConfigError("evaluate: empty test set");
    EvalResult r;
    r.confusion = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(num_classes, num_classes);
    for (size_t i = 0; i < truths.size(); ++i) {
        const LabelMap& p = predictions[i];
        const LabelMap& g = truths[i];
        if (p.rows() != g.rows() || p.cols() != g.cols())
            throw ShapeError("evaluate: prediction and ground truth differ in size");
        for (Eigen::Index k = 0; k < g.size(); ++k) {
            const int gt = g.data()[k];
            if (gt == ignore_label)
                continue;
            const int pr = p.data()[k];
            if (gt < 0 || gt >= num_classes || pr < 0 || pr >= num_classes)
                throw ShapeError("evaluate: label outside class range");
            ++r.confusion(gt, pr);
        }
    }
    r.class_iou.assign(static_cast<size_t>(num_classes), std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        const long tp = r.confusion(c, c);
        const long gt_total = r.confusion.row(c).sum();
        const long pred_total = r.confusion.col(c).sum();
        const long uni = gt_total + pred_total - tp;
        if (uni > 0)
            r.class_iou[static_cast<size_t>(c)] = double(tp) / double(uni);
        if (gt_total > 0) {
            sum += r.class_iou[static_cast<size_t>(c)];
            ++present;
        }
    }
    r.miou = present > 0 ? sum / present : 0.0;
    return r;
}

EvalResult evaluate(const DealNetwork<float>& net, const DealParams<float>& params,
                    const std::vector<SegSample>& test, int ignore_label)
{
    std::vector<LabelMap> preds;
    std::vector<LabelMap> truths;
    preds.reserve(test.size());
    truths.reserve(test.size());
    for (const SegSample& s : test) {
        preds.push_back(net.segmenter().forward(params.seg, s.image).argmax);
        truths.push_back(s.label);
    }
    return evaluate_predictions(preds, truths, net.classes(), ignore_label);
}

double class_distribution_entropy(const std::vector<const LabelMap*>& labels, int num_classes, int ignore_label)
{
    if (labels.empty())
        throw ConfigError("class_distribution_entropy: empty label set");
    std::vector<long> counts(static_cast<size_t>(num_classes), 0);
    long total = 0;
    for (const LabelMap* map : labels)
        for (Eigen::Index k = 0; k < map->size(); ++k) {
            const int v = map->data()[k];
            if (v == ignore_label || v < 0 || v >= num_classes)
                continue;
            ++counts[static_cast<size_t>(v)];
            ++total;
        }
    if (total == 0)
        return 0.0;
    double h = 0.0;
    for (long c : counts)
        if (c > 0) {
            const double p = double(c) / double(total);
            h -= p * std::log(p);
        }
    return std::max(0.0, h);
}

// ---------------------------------------------------------------------------
// scoring and selection

namespace {

std::vector<FeaturePoint> candidate_features(const DealNetwork<float>& net, const DealParams<float>& params,
                                             const SamplePool& pool, const std::vector<std::string>& ids)
{
    std::vector<FeaturePoint> out;
    out.reserve(ids.size());
    for (const std::string& id : ids)
        out.push_back({id, net.segmenter().encoder_features(params.seg, pool.image(id)).cast<double>()});
    return out;
}

std::vector<Eigen::VectorXd> labeled_features(const DealNetwork<float>& net, const DealParams<float>& params,
                                              const SamplePool& pool)
{
    std::vector<Eigen::VectorXd> out;
    for (const std::string& id : pool.annotated())
        out.push_back(net.segmenter().encoder_features(params.seg, pool.image(id)).cast<double>());
    return out;
}

}  // namespace

std::vector<AcquisitionScore> score_candidates(const ALConfig& cfg, const DealNetwork<float>& net,
                                               const DealParams<float>& params, const SamplePool& pool,
                                               const std::vector<std::string>& candidates, std::uint64_t seed)
{
    const std::string tag = to_string(cfg.strategy);
    std::vector<AcquisitionScore> scores;
    scores.reserve(candidates.size());
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    if (cfg.strategy == Strategy::coreset) {
        const std::vector<Eigen::VectorXd> labeled = labeled_features(net, params, pool);
        for (const FeaturePoint& p : candidate_features(net, params, pool, candidates)) {
            double nearest = std::numeric_limits<double>::infinity();
            for (const auto& f : labeled)
                nearest = std::min(nearest, (p.features - f).norm());
            scores.push_back({p.id, std::isfinite(nearest) ? nearest : 0.0, tag});
        }
        return scores;
    }

    for (size_t i = 0; i < candidates.size(); ++i) {
        const std::string& id = candidates[i];
        double value = 0.0;
        switch (cfg.strategy) {
        case Strategy::random:
            value = uniform(rng);
            break;
        case Strategy::entropy:
        case Strategy::lc:
        case Strategy::margin: {
            const auto probs = net.segmenter().forward(params.seg, pool.image(id));
            const UncertaintyKind kind = cfg.strategy == Strategy::entropy ? UncertaintyKind::entropy
                                         : cfg.strategy == Strategy::lc    ? UncertaintyKind::least_confidence
                                                                           : UncertaintyKind::margin;
            value = mean_score(uncertainty_map(probs.probs, kind));
            break;
        }
        case Strategy::ds: {
            const DealOutput<float> out = net.forward(params, pool.image(id));
            const UncertaintyMap full = uncertainty_map(out.probs.probs, cfg.uncertainty);
            value = score_ds(downsample_uncertainty(full, out.difficulty.height, out.difficulty.width),
                             out.difficulty);
            break;
        }
        case Strategy::de: {
            const DealOutput<float> out = net.forward(params, pool.image(id));
            value = score_de(quantize_difficulty(out.difficulty, cfg.levels));
            break;
        }
        case Strategy::qbc_entropy:
        case Strategy::qbc_vr: {
            const auto passes = net.segmenter().forward_mc_dropout(params.seg, to_scalar<float>(pool.image(id)),
                                                                   cfg.mc_passes, derive_seed(seed, i, 11));
            value = score_qbc(passes, cfg.strategy == Strategy::qbc_entropy ? QbcMode::max_entropy
                                                                            : QbcMode::variation_ratio);
            break;
        }
        case Strategy::coreset:
            break;
        }
        scores.push_back({id, value, tag});
    }
    return scores;
}

std::vector<std::string> select_batch(const ALConfig& cfg, const DealNetwork<float>& net,
                                      const DealParams<float>& params, const SamplePool& pool,
                                      const std::vector<std::string>& candidates, int budget, std::uint64_t seed,
                                      std::vector<AcquisitionScore>* scores_out)
{
    std::vector<AcquisitionScore> scores = score_candidates(cfg, net, params, pool, candidates, seed);
    std::vector<std::string> picked;
    if (cfg.strategy == Strategy::coreset) {
        const int m = std::min<int>(budget, static_cast<int>(candidates.size()));
        picked = select_coreset(labeled_features(net, params, pool), candidate_features(net, params, pool, candidates),
                                m);
    } else {
        picked = rank_and_select(scores, budget);
    }
    if (scores_out)
        *scores_out = std::move(scores);
    return picked;
}

// ---------------------------------------------------------------------------
// round loop

ALRunLedger run_active_learning(const ALConfig& cfg, SamplePool pool, const std::vector<SegSample>& test,
                                std::uint64_t seed, const RunOptions& options)
{
    cfg.validate();
    if (test.empty())
        throw ConfigError("run_active_learning: empty test set");
    for (const SegSample& s : test)
        if (pool.contains(s.id))
            throw ConfigError("run_active_learning: test sample " + s.id + " is also in the training pool");
    if (!pool.partition_ok())
        throw InvalidQueryError("run_active_learning: pool partition is inconsistent");

    const DealNetwork<float> net(cfg.model);
    ALRunLedger ledger;
    ledger.strategy = to_string(cfg.strategy);
    ledger.seed = seed;
    ledger.pam_enabled = cfg.model.pam_enabled;
    ledger.pool_size = static_cast<int>(pool.size());
    ledger.initial_count = static_cast<int>(pool.annotated().size());
    ledger.budget = cfg.budget_for(pool.size());
    ledger.num_classes = cfg.data.num_classes;
    const int subset = cfg.subset_for(pool.size());

    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir / "scores");
        std::filesystem::create_directories(*options.out_dir / "checkpoints");
    }

    ledger.status = "complete";
    for (int round = 0; round < cfg.data.rounds; ++round) {
        const auto start = std::chrono::steady_clock::now();
        RoundRecord rec;
        rec.round = round;
        rec.seed = seed;
        rec.labeled_count = static_cast<int>(pool.annotated().size());
        rec.labeled_fraction = double(rec.labeled_count) / double(pool.size());

        std::vector<const SegSample*> train_set;
        std::vector<const LabelMap*> labels;
        for (const std::string& id : pool.annotated()) {
            train_set.push_back(&pool.annotated_sample(id));
            labels.push_back(&pool.label(id));
        }
        std::vector<LossBundle<float>> history;
        const DealParams<float> params = train_deal(net, std::span<const SegSample* const>(train_set), cfg.train,
                                                    derive_seed(seed, std::uint64_t(round), 1), &history);
        if (!history.empty())
            rec.train_loss = history.back().total;

        const EvalResult eval = evaluate(net, params, test, cfg.data.ignore_label);
        rec.class_iou = eval.class_iou;
        rec.miou = eval.miou;
        rec.class_entropy = class_distribution_entropy(labels, cfg.data.num_classes, cfg.data.ignore_label);

        if (options.out_dir)
            save_checkpoint(params, cfg.model, round, rec.labeled_count, seed,
                            *options.out_dir / "checkpoints" / ("round_" + std::to_string(round) + ".json"));

        const bool last = round + 1 == cfg.data.rounds;
        if (!last && ledger.budget > 0) {
            if (static_cast<size_t>(ledger.budget) > pool.unlabeled().size()) {
                ledger.status = "pool_exhausted";
            } else {
                const auto candidates =
                    presample_subset(pool, std::max(subset, ledger.budget), derive_seed(seed, std::uint64_t(round), 2));
                std::vector<AcquisitionScore> scores;
                rec.selected = select_batch(cfg, net, params, pool, candidates, ledger.budget,
                                            derive_seed(seed, std::uint64_t(round), 3), &scores);
                if (options.out_dir)
                    write_scores(scores, *options.out_dir / "scores" / ("round_" + std::to_string(round) + ".tsv"));
                pool = oracle_annotate(std::move(pool), rec.selected);
                if (!pool.partition_ok())
                    throw InvalidQueryError("pool partition broken after annotation");
            }
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (options.verbose)
            std::cerr << "[" << ledger.strategy << " seed " << seed << "] round " << round << " labeled "
                      << rec.labeled_count << " mIoU " << std::fixed << std::setprecision(4) << rec.miou << " ("
                      << std::setprecision(1) << rec.wall_seconds << "s)\n";
        if (options.on_round)
            options.on_round(pool, rec);
        ledger.rounds.push_back(std::move(rec));
        if (options.out_dir)
            write_ledger(ledger, *options.out_dir / "ledger.jsonl");
        if (ledger.status == "pool_exhausted")
            break;
    }
    return ledger;
}

// ---------------------------------------------------------------------------
// files

namespace {

json iou_to_json(const std::vector<double>& iou)
{
    json arr = json::array();
    for (double v : iou)
        arr.push_back(std::isnan(v) ? json(nullptr) : json(v));
    return arr;
}

std::vector<double> iou_from_json(const json& arr)
{
    std::vector<double> out;
    for (const json& v : arr)
        out.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    return out;
}

}  // namespace

void write_ledger(const ALRunLedger& ledger, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write ledger " + path.string());
    json header{{"type", "run"},
                {"strategy", ledger.strategy},
                {"seed", ledger.seed},
                {"pam_enabled", ledger.pam_enabled},
                {"pool_size", ledger.pool_size},
                {"initial_count", ledger.initial_count},
                {"budget", ledger.budget},
                {"num_classes", ledger.num_classes}};
    out << header.dump() << '\n';
    for (const RoundRecord& r : ledger.rounds) {
        json rec{{"type", "round"},
                 {"round", r.round},
                 {"labeled_count", r.labeled_count},
                 {"labeled_fraction", r.labeled_fraction},
                 {"selected", r.selected},
                 {"class_iou", iou_to_json(r.class_iou)},
                 {"miou", r.miou},
                 {"class_entropy", r.class_entropy},
                 {"train_loss", r.train_loss},
                 {"wall_seconds", r.wall_seconds},
                 {"seed", r.seed}};
        out << rec.dump() << '\n';
    }
    out << json{{"type", "status"}, {"status", ledger.status}}.dump() << '\n';
}

ALRunLedger read_ledger(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read ledger " + path.string());
    ALRunLedger ledger;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const json j = json::parse(line);
        const std::string type = j.at("type").get<std::string>();
        if (type == "run") {
            saw_header = true;
            ledger.strategy = j.at("strategy").get<std::string>();
            ledger.seed = j.at("seed").get<std::uint64_t>();
            ledger.pam_enabled = j.at("pam_enabled").get<bool>();
            ledger.pool_size = j.at("pool_size").get<int>();
            ledger.initial_count = j.at("initial_count").get<int>();
            ledger.budget = j.at("budget").get<int>();
            ledger.num_classes = j.at("num_classes").get<int>();
        } else if (type == "round") {
            RoundRecord r;
            r.round = j.at("round").get<int>();
            r.labeled_count = j.at("labeled_count").get<int>();
            r.labeled_fraction = j.at("labeled_fraction").get<double>();
            r.selected = j.at("selected").get<std::vector<std::string>>();
            r.class_iou = iou_from_json(j.at("class_iou"));
            r.miou = j.at("miou").get<double>();
            r.class_entropy = j.at("class_entropy").get<double>();
            r.train_loss = j.at("train_loss").get<double>();
            r.wall_seconds = j.at("wall_seconds").get<double>();
            r.seed = j.at("seed").get<std::uint64_t>();
            ledger.rounds.push_back(std::move(r));
        } else if (type == "status") {
            ledger.status = j.at("status").get<std::string>();
        }
    }
    if (!saw_header)
        throw IoError("ledger " + path.string() + " has no run header");
    return ledger;
}

void write_scores(const std::vector<AcquisitionScore>& scores, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write scores " + path.string());
    out << "id\tstrategy\tscore\n";
    out << std::setprecision(17);
    for (const AcquisitionScore& s : scores)
        out << s.id << '\t' << s.strategy << '\t' << s.score << '\n';
}

void save_checkpoint(const DealParams<float>& params, const ModelConfig& model, int round, int labeled_count,
                     std::uint64_t seed, const std::filesystem::path& path)
{
    std::vector<float> theta(params.seg.theta.data(), params.seg.theta.data() + params.seg.theta.size());
    std::vector<float> head(params.head.weights.data(), params.head.weights.data() + params.head.weights.size());
    const json j{{"architecture", params.seg.architecture},
                 {"round", round},
                 {"labeled_count", labeled_count},
                 {"seed", seed},
                 {"pam_enabled", model.pam_enabled},
                 {"attention_grid", {model.attention_height, model.attention_width}},
                 {"seg_params", theta},
                 {"head_weights", head},
                 {"head_bias", params.head.bias},
                 {"head_gamma", params.head.gamma}};
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
}

DealParams<float> load_checkpoint(const std::filesystem::path& path, const ModelConfig& model)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read checkpoint " + path.string());
    const json j = json::parse(in);
    const DealNetwork<float> net(model);
    DealParams<float> params = net.init_params(0);
    if (j.at("architecture").get<std::string>() != params.seg.architecture)
        throw ConfigError("checkpoint architecture " + j.at("architecture").get<std::string>() +
                          " does not match " + params.seg.architecture);
    const auto theta = j.at("seg_params").get<std::vector<float>>();
    const auto head = j.at("head_weights").get<std::vector<float>>();
    if (static_cast<Eigen::Index>(theta.size()) != params.seg.size() ||
        static_cast<Eigen::Index>(head.size()) != params.head.weights.size())
        throw ShapeError("checkpoint parameter count mismatch");
    params.seg.theta = Eigen::Map<const VectorX<float>>(theta.data(), static_cast<Eigen::Index>(theta.size()));
    params.head.weights = Eigen::Map<const VectorX<float>>(head.data(), static_cast<Eigen::Index>(head.size()));
    params.head.bias = j.at("head_bias").get<float>();
    params.head.gamma = j.at("head_gamma").get<float>();
    return params;
}

}  // namespace deal
