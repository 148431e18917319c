// Command-line front end: probability maps, mask reconciliation, evaluation
// and the weak-supervision loss evaluators.

#include <CLI11.hpp>

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <maskfuse/maskfuse.hpp>

namespace fs = std::filesystem;
using namespace maskfuse;

namespace {

// Pipeline flags shared by probmap/reconcile. Resolution order:
// flag > config file > built-in default.
struct ConfigOpts {
    std::string config_path;
    int components = 0;
    int split = 0;
    double theta = 0.0;
    double lambda = 0.0;
    double clip = 0.0;
    std::uint64_t seed = 0;
    std::string solver;

    CLI::Option* components_opt = nullptr;
    CLI::Option* split_opt = nullptr;
    CLI::Option* theta_opt = nullptr;
    CLI::Option* lambda_opt = nullptr;
    CLI::Option* clip_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* solver_opt = nullptr;

    void add_common(CLI::App* sub) {
        sub->add_option("--config", config_path, "key=value config file");
        components_opt = sub->add_option("--components", components, "mixture components per model (default 5)")
                             ->check(CLI::Range(1, 1 << 20));
        split_opt = sub->add_option("--split", split, "patch grid is split x split (default 10)")
                        ->check(CLI::Range(1, 1 << 20));
        clip_opt = sub->add_option("--clip", clip, "log-likelihood clip magnitude (default 100)")
                       ->check(CLI::PositiveNumber);
        seed_opt = sub->add_option("--seed", seed, "random seed (default 0)");
    }

    void add_solver(CLI::App* sub) {
        theta_opt = sub->add_option("--theta", theta, "color similarity temperature (default 20)")
                        ->check(CLI::PositiveNumber);
        lambda_opt = sub->add_option("--lambda", lambda, "smoothing trade-off (default 2)")
                         ->check(CLI::NonNegativeNumber);
        solver_opt = sub->add_option("--solver", solver, "graphcut or bruteforce (default graphcut)")
                         ->check(CLI::IsMember({"graphcut", "bruteforce"}));
    }

    PipelineConfig resolve() const {
        PipelineConfig cfg;
        if (!config_path.empty()) apply_config_file(config_path, cfg);
        if (components_opt && components_opt->count()) cfg.components = components;
        if (split_opt && split_opt->count()) cfg.split = split;
        if (theta_opt && theta_opt->count()) cfg.theta = theta;
        if (lambda_opt && lambda_opt->count()) cfg.lambda = lambda;
        if (clip_opt && clip_opt->count()) cfg.clip = clip;
        if (seed_opt && seed_opt->count()) cfg.seed = seed;
        if (solver_opt && solver_opt->count())
            cfg.solver = solver == "bruteforce" ? SolverKind::bruteforce : SolverKind::graphcut;
        cfg.validate();
        return cfg;
    }
};

std::vector<std::string> list_png(const std::string& dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error(dir + ": not a directory");
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << text;
    if (!out.good()) throw std::runtime_error(path + ": write failed");
}

// ---- probmap ----

struct ProbmapArgs {
    std::string image, mask_a, mask_b, out;
    ConfigOpts cfg;
};

int run_probmap(const ProbmapArgs& a) {
    const PipelineConfig cfg = a.cfg.resolve();
    const RgbImage img = read_image_png(a.image);
    const BinaryMask ma = read_mask_png(a.mask_a);
    const BinaryMask mb = read_mask_png(a.mask_b);

    PatchStats stats;
    const ProbMap prob = build_probability_map(img, ma, mb, cfg, &stats);
    write_prob_pfm(prob, a.out);
    std::printf("patches fitted=%d fallback_fg=%d fallback_bg=%d skipped=%d\n", stats.fitted,
                stats.fallback_fg, stats.fallback_bg, stats.skipped);
    return 0;
}

// ---- reconcile ----

struct ReconcileArgs {
    std::string image, mask_a, mask_b, out, prob;
    ConfigOpts cfg;
};

int run_reconcile(const ReconcileArgs& a) {
    const PipelineConfig cfg = a.cfg.resolve();
    const RgbImage img = read_image_png(a.image);
    const BinaryMask ma = read_mask_png(a.mask_a);
    const BinaryMask mb = read_mask_png(a.mask_b);
    const AgreementMap agr = agreement(ma, mb);

    const ProbMap prob = a.prob.empty() ? build_probability_map(img, ma, mb, cfg) : read_prob_pfm(a.prob);
    const EnergyProblem problem = build_problem(img, prob, agr, cfg);
    const SolveResult res = solve(problem, cfg.solver);

    write_mask_png(res.labels, a.out);
    std::printf("objective=%.9g o_idf=%.9g o_scf=%.9g free=%lld time=%.3f\n", res.objective, res.o_idf,
                res.o_scf, res.free_count, res.solve_seconds);
    return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
    std::string pred_dir, gt_dir, out;
};

int run_evaluate(const EvaluateArgs& a) {
    const EvalReport report = evaluate_files(list_png(a.pred_dir), list_png(a.gt_dir));
    const std::string csv = to_csv(report);
    if (a.out.empty())
        std::fputs(csv.c_str(), stdout);
    else
        write_text_file(a.out, csv);
    return 0;
}

// ---- boxes-from-mask ----

struct BoxesArgs {
    std::string mask, out;
};

int run_boxes_from_mask(const BoxesArgs& a) {
    const BBoxList boxes = boxes_from_mask(read_mask_png(a.mask));
    if (a.out.empty()) {
        for (const BBox& b : boxes) std::printf("%d %d %d %d\n", b.x_min, b.y_min, b.x_max, b.y_max);
    } else {
        write_boxes(boxes, a.out);
    }
    return 0;
}

// ---- weakloss ----

struct WeaklossArgs {
    std::string mask, boxes, image;
    std::vector<std::string> losses;
    int neighbors = 4;
    double tau = 0.3;
    double theta_b = 15.0;
};

int run_weakloss(const WeaklossArgs& a) {
    const SoftMask soft = SoftMask::from_prob_map(read_prob_pfm(a.mask));

    bool need_boxes = false, need_image = false;
    for (const std::string& term : a.losses) {
        if (term == "mil-unary" || term == "boxinst-proj") need_boxes = true;
        if (term == "boxinst-pairwise") need_image = true;
    }
    if (need_boxes && a.boxes.empty())
        throw CLI::ValidationError("--boxes is required for mil-unary and boxinst-proj");
    if (need_image && a.image.empty())
        throw CLI::ValidationError("--image is required for boxinst-pairwise");

    const BBoxList boxes = need_boxes ? read_boxes(a.boxes) : BBoxList{};
    const RgbImage img = need_image ? read_image_png(a.image) : RgbImage{};

    for (const std::string& term : a.losses) {
        double loss = 0.0;
        if (term == "mil-unary")
            loss = mil_unary(soft, build_bags(boxes, soft.width, soft.height));
        else if (term == "mil-pairwise")
            loss = mil_pairwise(soft, a.neighbors);
        else if (term == "boxinst-proj")
            loss = boxinst_projection(soft, boxes);
        else
            loss = boxinst_pairwise(soft, img, a.tau, a.theta_b);
        std::printf("loss=%.9g\n", loss);
    }
    return 0;
}

// ---- oracle-check ----

struct OracleArgs {
    std::string size;
    int trials = 100;
    std::uint64_t seed = 0;
};

bool parse_size(const std::string& s, int& w, int& h) {
    const std::size_t x = s.find('x');
    if (x == std::string::npos) return false;
    long long a = 0, b = 0;
    if (!detail::parse_i64(s.substr(0, x), a) || !detail::parse_i64(s.substr(x + 1), b)) return false;
    if (a < 1 || b < 1) return false;
    w = static_cast<int>(a);
    h = static_cast<int>(b);
    return true;
}

EnergyProblem random_problem(std::mt19937_64& rng, int w, int h) {
    RgbImage img(w, h);
    for (Rgb& c : img.data)
        c = Rgb{static_cast<std::uint8_t>(rng() % 256), static_cast<std::uint8_t>(rng() % 256),
                static_cast<std::uint8_t>(rng() % 256)};

    EnergyProblem p;
    p.width = w;
    p.height = h;
    p.lambda = uniform_range(rng, 0.0, 4.0);
    p.prob.resize(img.pixel_count());
    p.fixed.resize(img.pixel_count());
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        p.prob[i] = uniform_unit(rng);
        const double u = uniform_unit(rng);
        p.fixed[i] = u < 0.6 ? FixState::FREE : (u < 0.8 ? FixState::FIXED_0 : FixState::FIXED_1);
    }
    p.right_w.resize(static_cast<std::size_t>(w - 1) * h);
    p.down_w.resize(static_cast<std::size_t>(w) * (h - 1));
    for (int y = 0; y < h; ++y)
        for (int x = 0; x + 1 < w; ++x)
            p.right_w[p.right_index(x, y)] = color_similarity(img.at(x, y), img.at(x + 1, y), 20.0);
    for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x < w; ++x)
            p.down_w[p.down_index(x, y)] = color_similarity(img.at(x, y), img.at(x, y + 1), 20.0);
    return p;
}

int run_oracle_check(const OracleArgs& a) {
    int w = 0, h = 0;
    if (!parse_size(a.size, w, h)) throw CLI::ValidationError("--size must look like 4x4");
    if (w * h > 25)
        throw CLI::ValidationError("--size " + a.size + " exceeds the exhaustive-search cap of 25 pixels");

    int failed = 0;
    for (int t = 0; t < a.trials; ++t) {
        const std::uint64_t trial_seed = a.seed + static_cast<std::uint64_t>(t);
        std::mt19937_64 rng(trial_seed);
        const EnergyProblem p = random_problem(rng, w, h);

        const SolveResult gc = solve_graphcut(p);
        const SolveResult bf = solve_bruteforce(p);

        bool ok = std::abs(gc.objective - bf.objective) <= 1e-9;
        for (std::size_t i = 0; ok && i < p.fixed.size(); ++i) {
            if (p.fixed[i] == FixState::FIXED_0 && gc.labels.data[i] != 0) ok = false;
            if (p.fixed[i] == FixState::FIXED_1 && gc.labels.data[i] != 1) ok = false;
        }
        if (!ok) {
            ++failed;
            std::fprintf(stderr,
                         "FAIL trial=%d seed=%" PRIu64 " size=%dx%d graphcut=%.17g exhaustive=%.17g\n", t,
                         trial_seed, w, h, gc.objective, bf.objective);
        }
    }
    std::printf("trials=%d passed=%d failed=%d\n", a.trials, a.trials - failed, failed);
    return failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Reconcile two candidate segmentation masks and evaluate the results"};
    app.require_subcommand(1);
    int rc = 0;

    auto pm = std::make_shared<ProbmapArgs>();
    {
        CLI::App* sub = app.add_subcommand("probmap", "compute a per-pixel foreground probability map");
        sub->add_option("--image", pm->image, "RGB image (PNG)")->required();
        sub->add_option("--mask-a", pm->mask_a, "first candidate mask (PNG)")->required();
        sub->add_option("--mask-b", pm->mask_b, "second candidate mask (PNG)")->required();
        sub->add_option("--out", pm->out, "output probability map (PFM)")->required();
        pm->cfg.add_common(sub);
        sub->callback([pm, &rc] { rc = run_probmap(*pm); });
    }

    auto rec = std::make_shared<ReconcileArgs>();
    {
        CLI::App* sub = app.add_subcommand("reconcile", "fuse two candidate masks into one");
        sub->add_option("--image", rec->image, "RGB image (PNG)")->required();
        sub->add_option("--mask-a", rec->mask_a, "first candidate mask (PNG)")->required();
        sub->add_option("--mask-b", rec->mask_b, "second candidate mask (PNG)")->required();
        sub->add_option("--out", rec->out, "output mask (PNG)")->required();
        sub->add_option("--prob", rec->prob, "reuse a precomputed probability map (PFM)");
        rec->cfg.add_common(sub);
        rec->cfg.add_solver(sub);
        sub->callback([rec, &rc] { rc = run_reconcile(*rec); });
    }

    auto ev = std::make_shared<EvaluateArgs>();
    {
        CLI::App* sub = app.add_subcommand("evaluate", "score prediction masks against ground truth");
        sub->add_option("--pred", ev->pred_dir, "directory of prediction PNGs")->required();
        sub->add_option("--gt", ev->gt_dir, "directory of ground-truth PNGs")->required();
        sub->add_option("--out", ev->out, "output CSV (stdout if omitted)");
        sub->callback([ev, &rc] { rc = run_evaluate(*ev); });
    }

    auto bx = std::make_shared<BoxesArgs>();
    {
        CLI::App* sub = app.add_subcommand("boxes-from-mask", "extract component bounding boxes");
        sub->add_option("--mask", bx->mask, "binary mask (PNG)")->required();
        sub->add_option("--out", bx->out, "output box list (stdout if omitted)");
        sub->callback([bx, &rc] { rc = run_boxes_from_mask(*bx); });
    }

    auto wl = std::make_shared<WeaklossArgs>();
    {
        CLI::App* sub = app.add_subcommand("weakloss", "evaluate weak-supervision losses on a soft mask");
        sub->add_option("--mask", wl->mask, "soft mask (PFM)")->required();
        sub->add_option("--loss", wl->losses, "loss terms to evaluate")
            ->required()
            ->check(CLI::IsMember({"mil-unary", "mil-pairwise", "boxinst-proj", "boxinst-pairwise"}));
        sub->add_option("--boxes", wl->boxes, "box list file (mil-unary, boxinst-proj)");
        sub->add_option("--image", wl->image, "RGB image (boxinst-pairwise)");
        sub->add_option("--neighbors", wl->neighbors, "neighborhood for mil-pairwise (default 4)")
            ->check(CLI::IsMember({4, 8}));
        sub->add_option("--tau", wl->tau, "color similarity threshold (default 0.3)")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--theta-b", wl->theta_b, "color similarity temperature (default 15)")
            ->check(CLI::PositiveNumber);
        sub->callback([wl, &rc] { rc = run_weakloss(*wl); });
    }

    auto oc = std::make_shared<OracleArgs>();
    {
        CLI::App* sub = app.add_subcommand("oracle-check", "compare the solver against exhaustive search");
        sub->add_option("--size", oc->size, "problem size WxH, at most 25 pixels")->required();
        sub->add_option("--trials", oc->trials, "number of random instances (default 100)")
            ->check(CLI::Range(1, 1 << 30));
        sub->add_option("--seed", oc->seed, "base seed (default 0)");
        sub->callback([oc, &rc] { rc = run_oracle_check(*oc); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return rc;
}
