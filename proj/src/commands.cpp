#include "descatter/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "descatter/container.hpp"
#include "descatter/descatter.hpp"
#include "descatter/errors.hpp"
#include "descatter/oracle.hpp"
#include "descatter/recon.hpp"
#include "descatter/rng.hpp"
#include "descatter/util.hpp"

namespace descatter {

namespace {

std::string img_name(int i, const char* kind) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "img%03d.%s", i, kind);
    return buf;
}

std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.output_dir);
    return std::filesystem::path(cfg.output_dir) / name;
}

Spectrum spectrum_from_config(const RunConfig& cfg) {
    if (cfg.mono_mode()) return Spectrum::mono();
    if (cfg.spectrum == "builtin") return Spectrum::triangular();
    auto [energies, weights] = load_energy_csv(cfg.spectrum);
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (!(sum > 0.0)) throw ConfigError("spectrum file has nonpositive total weight");
    for (double& w : weights) w /= sum;
    Spectrum s{std::move(energies), std::move(weights)};
    s.validate();
    return s;
}

AttenuationTable atten_from_config(const RunConfig& cfg, const Spectrum& s) {
    if (cfg.attenuation == "builtin") return AttenuationTable::synthetic(s.energies_mev);
    auto [energies, xi] = load_energy_csv(cfg.attenuation);
    AttenuationTable t{0, std::move(energies), std::move(xi)};
    t.validate();
    for (double e : s.energies_mev) t.at(e);  // must cover the spectrum
    return t;
}

ScatterOracleParams oracle_from_config(const RunConfig& cfg) {
    if (!cfg.oracle_params.empty()) return load_oracle_params(cfg.oracle_params);
    return ScatterOracleParams::defaults(cfg.seed_oracle);
}

Container open_dataset(const RunConfig& cfg) {
    if (cfg.dataset_dir.empty()) throw ConfigError("no dataset directory configured");
    Container c = Container::open(cfg.dataset_dir);
    if (c.grid_size() != cfg.grid_size)
        throw ConfigError("dataset grid size " + std::to_string(c.grid_size()) +
                          " does not match configured " + std::to_string(cfg.grid_size));
    return c;
}

struct Split {
    std::vector<int> train, test;
};

Split dataset_split(const Container& c, const RunConfig& cfg) {
    int count = cfg.count, train = cfg.train_count, test = cfg.test_count;
    const auto& meta = c.meta();
    if (meta.contains("count")) count = meta.at("count").get<int>();
    if (meta.contains("train_count")) train = meta.at("train_count").get<int>();
    if (meta.contains("test_count")) test = meta.at("test_count").get<int>();
    if (train < 1 || test < 0 || train + test > count)
        throw ConfigError("dataset split does not fit its image count");
    Split s;
    for (int i = 0; i < train; ++i) s.train.push_back(i);
    for (int i = count - test; i < count; ++i) s.test.push_back(i);
    return s;
}

RadPair load_pair(const Container& c, int i) {
    return RadPair{c.get_radiograph(img_name(i, "direct")), c.get_radiograph(img_name(i, "scatter"))};
}

TrainingSet load_training(const Container& c, const std::vector<int>& idx, const RunConfig& cfg) {
    std::vector<RadPair> pairs;
    pairs.reserve(idx.size());
    for (int i : idx) pairs.push_back(load_pair(c, i));
    return TrainingSet::build(std::move(pairs), cfg.nn_mask);
}

FitOptions fit_options(const RunConfig& cfg) {
    FitOptions opt;
    opt.cg_iters = cfg.cg_iters;
    opt.lbfgs.iters = cfg.lbfgs_iters;
    opt.regions = cfg.regions;
    return opt;
}

DescatterOptions descatter_options(const RunConfig& cfg) {
    DescatterOptions opt;
    opt.model = model_class_from_string(cfg.model);
    opt.mode = fit_mode_from_string(cfg.mode);
    opt.neighbors = cfg.neighbors;
    opt.iters = cfg.iters;
    opt.early_stop_nmse = cfg.early_stop_nmse;
    opt.nn_on_total = cfg.nn_on_total;
    opt.fit = fit_options(cfg);
    return opt;
}

double dataset_rho_max(const Container& c, const RunConfig& cfg, double extra_scale = 1.0) {
    const auto doc = c.get_json("phantoms");
    double peak = 0.0;
    for (const auto& j : doc.at("phantoms")) {
        const ShellPhantom p = phantom_from_json(j);
        peak = std::max(peak, chord_areal_density(p, 0.0));
    }
    if (!(peak > 0.0)) throw NumericalError("dataset has no attenuating phantom");
    return cfg.rho_max_factor * peak * extra_scale;
}

ReconConfig recon_config(const RunConfig& cfg, const Container& c, double extra_scale = 1.0) {
    ReconConfig rc;
    rc.lut_size = cfg.lut_size;
    if (cfg.mono_mode()) {
        rc.mono = true;
        rc.xi = cfg.mono_xi();
        return rc;
    }
    rc.mono = false;
    rc.spectrum = spectrum_from_config(cfg);
    rc.atten = atten_from_config(cfg, rc.spectrum);
    rc.rho_max = dataset_rho_max(c, cfg, extra_scale);
    return rc;
}

double masked_rel_l2(const Grid& a, const Grid& b, const Mask& m) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.npix(); ++i) {
        if (!m.at(i)) continue;
        const double r = a.vec()[i] - b.vec()[i];
        num += r * r;
        den += b.vec()[i] * b.vec()[i];
    }
    if (!(den > 0.0)) throw NumericalError("relative error: zero reference");
    return std::sqrt(num / den);
}

uint64_t mix_seed(uint64_t base, uint64_t a, uint64_t b) {
    uint64_t v[3] = {base, a, b};
    return fnv1a64(reinterpret_cast<const char*>(v), sizeof v);
}

std::string hash_hex(uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

uint64_t neighbors_hash(const std::vector<std::vector<int>>& nbs) {
    uint64_t h = 1469598103934665603ull;
    for (const auto& nb : nbs)
        for (int i : nb) {
            const uint32_t v = static_cast<uint32_t>(i);
            h = fnv1a64(reinterpret_cast<const char*>(&v), sizeof v, h);
        }
    return h;
}

// physics products for one phantom, reused by generate and scatter-scale
struct ImageSet {
    Radiograph areal, direct, scatter, total;
    Grid truth;
};

ImageSet render_phantom(const ShellPhantom& ph, const Geometry& geom, const RunConfig& cfg,
                        const Spectrum& spec, const AttenuationTable& atten,
                        const ScatterOracleParams& oracle) {
    ImageSet im;
    im.areal = project_phantom(ph, geom);
    im.direct = cfg.mono_mode() ? direct_mono(im.areal, cfg.mono_xi())
                                : direct_poly(im.areal, spec, atten);
    im.scatter = simulate_scatter(im.direct, im.areal, oracle);
    Grid total(im.direct.img.n());
    for (size_t i = 0; i < total.npix(); ++i) {
        // stored entries are float32; make the t = d + s identity exact in
        // that precision
        const float d = static_cast<float>(im.direct.img.vec()[i]);
        const float s = static_cast<float>(im.scatter.img.vec()[i]);
        total.vec()[i] = static_cast<double>(d + s);
    }
    im.total = im.direct.like(std::move(total));
    im.truth = rasterize_central_slice(ph, geom);
    return im;
}

const char* kModelNames[] = {"single-field", "convolutional", "parametric", "multikernel"};
const ModelClass kModelClasses[] = {ModelClass::single_field, ModelClass::convolutional,
                                    ModelClass::parametric, ModelClass::multikernel};

}  // namespace

void cmd_generate(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dataset_dir.empty()) throw ConfigError("generate: no dataset directory configured");
    const Geometry geom = cfg.geometry();

    DatasetParams dp;
    dp.count = cfg.count;
    dp.seed = cfg.seed_dataset;
    dp.shells = cfg.shells;
    dp.outer_radius = cfg.roi_radius;
    dp.r_min = cfg.r_min;
    dp.r_max = cfg.r_max;
    dp.palette = cfg.palette;
    const std::vector<ShellPhantom> phantoms = generate_dataset(dp);

    const ScatterOracleParams oracle = oracle_from_config(cfg);
    const Spectrum spec = spectrum_from_config(cfg);
    const AttenuationTable atten =
        cfg.mono_mode() ? AttenuationTable() : atten_from_config(cfg, spec);

    nlohmann::json meta;
    meta["count"] = cfg.count;
    meta["train_count"] = cfg.train_count;
    meta["test_count"] = cfg.test_count;
    meta["config_hash"] = hash_hex(cfg.hash());
    meta["spectrum"] = cfg.spectrum;
    Container c = Container::create(cfg.dataset_dir, cfg.grid_size, cfg.pitch(), cfg.roi_radius,
                                    std::move(meta));

    nlohmann::json pdoc;
    pdoc["schema_version"] = 1;
    pdoc["phantoms"] = nlohmann::json::array();
    for (const auto& p : phantoms) pdoc["phantoms"].push_back(phantom_to_json(p));
    c.put_json("phantoms", pdoc);
    c.put_json("oracle_params", oracle_params_to_json(oracle));

    std::vector<ImageSet> sets(phantoms.size());
    parallel_for(static_cast<int>(phantoms.size()), effective_threads(cfg), [&](int i) {
        sets[i] = render_phantom(phantoms[i], geom, cfg, spec, atten, oracle);
    });
    for (size_t i = 0; i < sets.size(); ++i) {
        const int id = static_cast<int>(i);
        c.put(img_name(id, "areal"), sets[i].areal.img);
        c.put(img_name(id, "direct"), sets[i].direct.img);
        c.put(img_name(id, "scatter"), sets[i].scatter.img);
        c.put(img_name(id, "total"), sets[i].total.img);
        c.put(img_name(id, "truth"), sets[i].truth);
    }
    std::printf("generated %zu image sets (grid %d, pitch %.6g cm) in %s\n", sets.size(),
                cfg.grid_size, cfg.pitch(), cfg.dataset_dir.c_str());
}

void cmd_fit(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const TrainingSet ts = load_training(c, split.train, cfg);
    const ModelClass cls = model_class_from_string(cfg.model);
    const FitOptions opt = fit_options(cfg);

    CsvWriter csv(out_path(cfg, "fit.csv"), cfg.hash(), "model,mode,query,neighbors,objective");
    if (fit_mode_from_string(cfg.mode) == FitMode::global) {
        ScatterModel m = fit_global(ts, cls, opt);
        const std::string file = std::string("model_global_") + cfg.model + ".json";
        save_model(m, out_path(cfg, file));
        std::vector<const RadPair*> all;
        for (const auto& p : ts.pairs) all.push_back(&p);
        const double obj = fit_objective(m, all);
        csv.row().col(cfg.model).col("global").col("").col("").col(obj);
        std::printf("fit global %s model: objective %.6g -> %s\n", cfg.model.c_str(), obj,
                    out_path(cfg, file).string().c_str());
        return;
    }
    for (int id : split.test) {
        const Radiograph query = c.get_radiograph(img_name(id, "total"));
        const std::vector<int> nb = nearest_neighbors(query.img, ts, cfg.neighbors);
        ScatterModel m = fit_local(query, ts, cfg.neighbors, cls, opt);
        char file[96];
        std::snprintf(file, sizeof file, "model_local_%s_img%03d.json", cfg.model.c_str(), id);
        save_model(m, out_path(cfg, file));
        std::vector<const RadPair*> sel;
        for (int i : nb) sel.push_back(&ts.pairs[i]);
        const double obj = fit_objective(m, sel);
        std::string nbs;
        for (size_t k = 0; k < nb.size(); ++k) nbs += (k ? ";" : "") + std::to_string(nb[k]);
        csv.row().col(cfg.model).col("local").col(img_name(id, "total")).col(nbs).col(obj);
        std::printf("fit local %s model for image %d (neighbors %s): objective %.6g\n",
                    cfg.model.c_str(), id, nbs.c_str(), obj);
    }
}

void cmd_descatter(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const TrainingSet ts = load_training(c, split.train, cfg);
    const DescatterOptions opt = descatter_options(cfg);

    const int n = static_cast<int>(split.test.size());
    std::vector<DescatterTrace> traces(n);
    std::vector<double> rel_err(n);
    parallel_for(n, effective_threads(cfg), [&](int k) {
        const int id = split.test[k];
        const Radiograph t = c.get_radiograph(img_name(id, "total"));
        traces[k] = descatter(t, ts, opt);
        const Radiograph d_true = c.get_radiograph(img_name(id, "direct"));
        rel_err[k] = masked_rel_l2(traces[k].final_direct.img, d_true.img, t.roi());
    });

    CsvWriter summary(out_path(cfg, "descatter.csv"), cfg.hash(),
                      "phantom_id,model,mode,G,final_nmse,refits,direct_rel_err");
    CsvWriter trace_csv(out_path(cfg, "descatter_trace.csv"), cfg.hash(),
                        "phantom_id,iteration,nmse");
    for (int k = 0; k < n; ++k) {
        const int id = split.test[k];
        write_f32(out_path(cfg, img_name(id, "dhat.f32")), traces[k].final_direct.img);
        summary.row()
            .col(id)
            .col(cfg.model)
            .col(cfg.mode)
            .col(opt.mode == FitMode::local ? opt.neighbors : static_cast<int>(ts.size()))
            .col(traces[k].nmse.back())
            .col(traces[k].refit_count)
            .col(rel_err[k]);
        for (size_t it = 0; it < traces[k].nmse.size(); ++it)
            trace_csv.row().col(id).col(static_cast<int>(it + 1)).col(traces[k].nmse[it]);
        std::printf("img%03d: nmse %.3e after %zu iterations, direct error %.4f\n", id,
                    traces[k].nmse.back(), traces[k].nmse.size(), rel_err[k]);
    }
}

void cmd_reconstruct(const RunConfig& cfg, const std::string& entry, const std::string& truth_entry,
                     const std::string& nuisance_entry, const std::string& nuisance_atten_csv) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Radiograph d = c.get_radiograph(entry);

    ReconConfig rc = recon_config(cfg, c);
    Grid eta;
    if (!nuisance_entry.empty()) {
        if (rc.mono)
            throw ConfigError("nuisance handling requires a polyenergetic spectrum");
        if (nuisance_atten_csv.empty())
            throw ConfigError("nuisance map given without its attenuation table");
        auto [energies, xi] = load_energy_csv(nuisance_atten_csv);
        rc.eta_atten = AttenuationTable{1, std::move(energies), std::move(xi)};
        rc.eta_atten.validate();
        eta = c.get(nuisance_entry);
        rc.eta_map = &eta;
        rc.eta_max = std::max(1e-12, max_abs(eta));
        rc.eta_levels = cfg.nuisance_levels;
    }

    InvertStats stats;
    const Grid slice = reconstruct(d, rc, &stats);
    const std::string out_name = "recon_" + entry + ".f32";
    write_f32(out_path(cfg, out_name), slice);

    CsvWriter csv(out_path(cfg, "reconstruct.csv"), cfg.hash(), "entry,mode,clamped,made");
    double m = std::nan("");
    if (!truth_entry.empty()) m = made(slice, c.get(truth_entry));
    auto row = csv.row();
    row.col(entry).col(rc.mono ? "mono" : "poly").col(static_cast<long long>(stats.clamped));
    if (!truth_entry.empty())
        row.col(m);
    else
        row.col("");
    std::printf("reconstructed %s -> %s (clamped %ld)%s\n", entry.c_str(),
                out_path(cfg, out_name).string().c_str(), stats.clamped,
                truth_entry.empty() ? "" : (", made " + format_double(m)).c_str());
}

namespace {

struct EvalRow {
    double made = 0.0;
    double nmse = 0.0;
    int refits = 0;
    std::vector<double> trace;
};

void write_summary_row(CsvWriter& csv, const std::string& method, const std::string& mode, int g,
                       std::vector<double> values) {
    const std::vector<double> s = five_number_summary(std::move(values));
    csv.row().col(method).col(mode).col(g).col(s[0]).col(s[1]).col(s[2]).col(s[3]).col(s[4]);
}

}  // namespace

void cmd_eval(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const TrainingSet ts = load_training(c, split.train, cfg);
    const FitOptions fopt = fit_options(cfg);
    const ReconConfig rc = recon_config(cfg, c);
    const int n = static_cast<int>(split.test.size());
    if (n == 0) throw ConfigError("eval: dataset has no test images");
    const int workers = effective_threads(cfg);

    // reference rows: reconstruct the raw total and the true direct
    std::vector<double> made_raw(n), made_ideal(n);
    parallel_for(n, workers, [&](int k) {
        const int id = split.test[k];
        const Grid truth = c.get(img_name(id, "truth"));
        made_raw[k] = made(reconstruct(c.get_radiograph(img_name(id, "total")), rc), truth);
        made_ideal[k] = made(reconstruct(c.get_radiograph(img_name(id, "direct")), rc), truth);
    });

    CsvWriter images(out_path(cfg, "eval_images.csv"), cfg.hash(),
                     "phantom_id,method,mode,G,final_nmse,refits,made");
    CsvWriter traces(out_path(cfg, "eval_traces.csv"), cfg.hash(),
                     "phantom_id,method,mode,iteration,nmse");
    CsvWriter summary(out_path(cfg, "eval_summary.csv"), cfg.hash(),
                      "method,mode,G,made_min,made_q1,made_median,made_q3,made_max");

    for (int k = 0; k < n; ++k) {
        images.row().col(split.test[k]).col("with-scatter").col("reference").col(0).col("").col(0).col(
            made_raw[k]);
        images.row().col(split.test[k]).col("without-scatter").col("reference").col(0).col("").col(0).col(
            made_ideal[k]);
    }
    write_summary_row(summary, "with-scatter", "reference", 0, made_raw);
    write_summary_row(summary, "without-scatter", "reference", 0, made_ideal);

    for (int mi = 0; mi < 4; ++mi) {
        for (const FitMode mode : {FitMode::global, FitMode::local}) {
            DescatterOptions opt;
            opt.model = kModelClasses[mi];
            opt.mode = mode;
            opt.neighbors = cfg.neighbors;
            opt.iters = cfg.iters;
            opt.early_stop_nmse = cfg.early_stop_nmse;
            opt.nn_on_total = cfg.nn_on_total;
            opt.fit = fopt;

            std::optional<ScatterModel> global_model;
            if (mode == FitMode::global) global_model = fit_global(ts, opt.model, opt.fit);

            std::vector<EvalRow> rows(n);
            parallel_for(n, workers, [&](int k) {
                const int id = split.test[k];
                const Radiograph t = c.get_radiograph(img_name(id, "total"));
                DescatterTrace tr = mode == FitMode::global
                                        ? descatter_with_model(t, *global_model, opt.iters,
                                                               opt.early_stop_nmse)
                                        : descatter(t, ts, opt);
                rows[k].nmse = tr.nmse.back();
                rows[k].refits = mode == FitMode::global ? 1 : tr.refit_count;
                rows[k].trace = tr.nmse;
                rows[k].made = made(reconstruct(tr.final_direct, rc), c.get(img_name(id, "truth")));
            });

            const int g = mode == FitMode::local ? cfg.neighbors : static_cast<int>(ts.size());
            std::vector<double> mades;
            for (int k = 0; k < n; ++k) {
                images.row()
                    .col(split.test[k])
                    .col(kModelNames[mi])
                    .col(to_string(mode))
                    .col(g)
                    .col(rows[k].nmse)
                    .col(rows[k].refits)
                    .col(rows[k].made);
                for (size_t it = 0; it < rows[k].trace.size(); ++it)
                    traces.row()
                        .col(split.test[k])
                        .col(kModelNames[mi])
                        .col(to_string(mode))
                        .col(static_cast<int>(it + 1))
                        .col(rows[k].trace[it]);
                mades.push_back(rows[k].made);
            }
            write_summary_row(summary, kModelNames[mi], to_string(mode), g, mades);
            std::printf("eval %-13s %-6s median made %.5f\n", kModelNames[mi], to_string(mode),
                        five_number_summary(mades)[2]);
        }
    }
    std::printf("eval reference rows: with-scatter median %.5f, without-scatter median %.5f\n",
                five_number_summary(made_raw)[2], five_number_summary(made_ideal)[2]);
}

void cmd_oracle_fit(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const FitOptions fopt = fit_options(cfg);
    const ReconConfig rc = recon_config(cfg, c);
    const int n = static_cast<int>(split.test.size());
    if (n == 0) throw ConfigError("oracle-fit: dataset has no test images");

    struct Row {
        double raw = 0.0, ideal = 0.0;
        double by_model[4] = {0, 0, 0, 0};
    };
    std::vector<Row> rows(n);
    parallel_for(n, effective_threads(cfg), [&](int k) {
        const int id = split.test[k];
        const RadPair pair = load_pair(c, id);
        const Radiograph t = c.get_radiograph(img_name(id, "total"));
        const Grid truth = c.get(img_name(id, "truth"));
        rows[k].raw = made(reconstruct(t, rc), truth);
        rows[k].ideal = made(reconstruct(pair.direct, rc), truth);
        const TrainingSet self = TrainingSet::build({pair}, cfg.nn_mask);
        for (int mi = 0; mi < 4; ++mi) {
            const ScatterModel m = fit_global(self, kModelClasses[mi], fopt);
            const Radiograph s_hat = apply_model(m, pair.direct);
            Grid dhat(t.img.n());
            for (size_t i = 0; i < dhat.npix(); ++i)
                dhat.vec()[i] = std::max(0.0, t.img.vec()[i] - s_hat.img.vec()[i]);
            rows[k].by_model[mi] = made(reconstruct(t.like(std::move(dhat)), rc), truth);
        }
    });

    CsvWriter csv(out_path(cfg, "oracle_fit.csv"), cfg.hash(),
                  "phantom_id,with_scatter,without_scatter,single_field,convolutional,parametric,"
                  "multikernel");
    std::vector<double> raw, ideal, per_model[4];
    for (int k = 0; k < n; ++k) {
        auto r = csv.row();
        r.col(split.test[k]).col(rows[k].raw).col(rows[k].ideal);
        for (int mi = 0; mi < 4; ++mi) r.col(rows[k].by_model[mi]);
        raw.push_back(rows[k].raw);
        ideal.push_back(rows[k].ideal);
        for (int mi = 0; mi < 4; ++mi) per_model[mi].push_back(rows[k].by_model[mi]);
    }
    auto med = [](std::vector<double> v) { return lower_median(std::move(v)); };
    auto r = csv.row();
    r.col("median").col(med(raw)).col(med(ideal));
    for (int mi = 0; mi < 4; ++mi) r.col(med(per_model[mi]));
    std::printf("oracle fit median made: raw %.5f, ideal %.5f, single-field %.5f, conv %.5f, "
                "parametric %.5f, multikernel %.5f\n",
                med(raw), med(ideal), med(per_model[0]), med(per_model[1]), med(per_model[2]),
                med(per_model[3]));
}

void cmd_scatter_estimation(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const TrainingSet ts = load_training(c, split.train, cfg);
    const FitOptions fopt = fit_options(cfg);
    const ReconConfig rc = recon_config(cfg, c);
    const int n = static_cast<int>(split.test.size());
    if (n == 0) throw ConfigError("scatter-estimation: dataset has no test images");
    const int workers = effective_threads(cfg);

    CsvWriter images(out_path(cfg, "scatter_estimation_images.csv"), cfg.hash(),
                     "phantom_id,method,mode,G,made_estimation,made_descatter");
    CsvWriter summary(out_path(cfg, "scatter_estimation.csv"), cfg.hash(),
                      "method,mode,G,made_estimation_median,made_descatter_median,rel_diff");

    for (int mi = 0; mi < 4; ++mi) {
        for (const FitMode mode : {FitMode::global, FitMode::local}) {
            DescatterOptions opt;
            opt.model = kModelClasses[mi];
            opt.mode = mode;
            opt.neighbors = cfg.neighbors;
            opt.iters = cfg.iters;
            opt.nn_on_total = cfg.nn_on_total;
            opt.fit = fopt;

            std::optional<ScatterModel> global_model;
            if (mode == FitMode::global) global_model = fit_global(ts, opt.model, opt.fit);

            std::vector<double> est(n), desc(n);
            parallel_for(n, workers, [&](int k) {
                const int id = split.test[k];
                const RadPair pair = load_pair(c, id);
                const Radiograph t = c.get_radiograph(img_name(id, "total"));
                const Grid truth = c.get(img_name(id, "truth"));
                // estimate from the known true direct
                const ScatterModel m = mode == FitMode::global
                                           ? *global_model
                                           : fit_local(pair.direct, ts, cfg.neighbors,
                                                       opt.model, fopt);
                const Radiograph s_hat = apply_model(m, pair.direct);
                Grid dhat(t.img.n());
                for (size_t i = 0; i < dhat.npix(); ++i)
                    dhat.vec()[i] = std::max(0.0, t.img.vec()[i] - s_hat.img.vec()[i]);
                est[k] = made(reconstruct(t.like(std::move(dhat)), rc), truth);
                // and the full fixed-point result for comparison
                DescatterTrace tr = mode == FitMode::global
                                        ? descatter_with_model(t, *global_model, opt.iters)
                                        : descatter(t, ts, opt);
                desc[k] = made(reconstruct(tr.final_direct, rc), truth);
            });

            const int g = mode == FitMode::local ? cfg.neighbors : static_cast<int>(ts.size());
            for (int k = 0; k < n; ++k)
                images.row()
                    .col(split.test[k])
                    .col(kModelNames[mi])
                    .col(to_string(mode))
                    .col(g)
                    .col(est[k])
                    .col(desc[k]);
            const double me = lower_median(est), md = lower_median(desc);
            summary.row()
                .col(kModelNames[mi])
                .col(to_string(mode))
                .col(g)
                .col(me)
                .col(md)
                .col(md > 0.0 ? (me - md) / md : 0.0);
            std::printf("scatter estimation %-13s %-6s median made %.5f (descatter %.5f)\n",
                        kModelNames[mi], to_string(mode), me, md);
        }
    }
}

void cmd_sweep_neighbors(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const TrainingSet ts = load_training(c, split.train, cfg);
    const ReconConfig rc = recon_config(cfg, c);
    const int n = static_cast<int>(split.test.size());
    if (n == 0) throw ConfigError("sweep-neighbors: dataset has no test images");
    const int workers = effective_threads(cfg);

    CsvWriter images(out_path(cfg, "sweep_neighbors_images.csv"), cfg.hash(),
                     "phantom_id,mode,G,final_nmse,made");
    CsvWriter summary(out_path(cfg, "sweep_neighbors.csv"), cfg.hash(),
                      "mode,G,made_min,made_q1,made_median,made_q3,made_max");

    DescatterOptions opt = descatter_options(cfg);
    auto run = [&](FitMode mode, int g, const char* label) {
        opt.mode = mode;
        opt.neighbors = std::max(1, g);
        std::optional<ScatterModel> global_model;
        if (mode == FitMode::global) global_model = fit_global(ts, opt.model, opt.fit);
        std::vector<double> mades(n), nmses(n);
        parallel_for(n, workers, [&](int k) {
            const int id = split.test[k];
            const Radiograph t = c.get_radiograph(img_name(id, "total"));
            DescatterTrace tr = mode == FitMode::global
                                    ? descatter_with_model(t, *global_model, opt.iters)
                                    : descatter(t, ts, opt);
            nmses[k] = tr.nmse.back();
            mades[k] = made(reconstruct(tr.final_direct, rc), c.get(img_name(id, "truth")));
        });
        const int gcol = mode == FitMode::global ? static_cast<int>(ts.size()) : g;
        for (int k = 0; k < n; ++k)
            images.row().col(split.test[k]).col(label).col(gcol).col(nmses[k]).col(mades[k]);
        const std::vector<double> s = five_number_summary(mades);
        summary.row().col(label).col(gcol).col(s[0]).col(s[1]).col(s[2]).col(s[3]).col(s[4]);
        std::printf("sweep %s G=%d median made %.5f\n", label, gcol, lower_median(mades));
    };

    for (int g : cfg.sweep_neighbors) run(FitMode::local, g, "local");
    run(FitMode::global, 0, "global");
}

void cmd_noise(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    const TrainingSet ts = load_training(c, split.train, cfg);
    const DescatterOptions opt = descatter_options(cfg);
    const int n = static_cast<int>(split.test.size());
    if (n == 0) throw ConfigError("noise: dataset has no test images");
    if (cfg.noise_sigmas.size() < 2)
        throw ConfigError("noise: need at least two noise levels for the linear fit");
    const int workers = effective_threads(cfg);

    std::vector<double> sigmas = {0.0};
    sigmas.insert(sigmas.end(), cfg.noise_sigmas.begin(), cfg.noise_sigmas.end());

    CsvWriter csv(out_path(cfg, "noise.csv"), cfg.hash(),
                  "sigma,phantom_id,rmse,final_nmse,neighbors_hash");
    std::vector<double> mean_rmse(sigmas.size(), 0.0);
    std::vector<std::vector<uint64_t>> hashes(sigmas.size(), std::vector<uint64_t>(n));
    for (size_t si = 0; si < sigmas.size(); ++si) {
        std::vector<double> rmse(n), last_nmse(n);
        parallel_for(n, workers, [&](int k) {
            const int id = split.test[k];
            const Radiograph clean = c.get_radiograph(img_name(id, "total"));
            const Radiograph t =
                add_awgn(clean, sigmas[si], mix_seed(cfg.seed_noise, si, static_cast<uint64_t>(id)));
            DescatterTrace tr = descatter(t, ts, opt);
            const Radiograph d_true = c.get_radiograph(img_name(id, "direct"));
            const Mask m = clean.roi();
            double acc = 0.0;
            size_t cnt = 0;
            for (size_t i = 0; i < d_true.img.npix(); ++i) {
                if (!m.at(i)) continue;
                const double r = tr.final_direct.img.vec()[i] - d_true.img.vec()[i];
                acc += r * r;
                ++cnt;
            }
            rmse[k] = std::sqrt(acc / static_cast<double>(cnt));
            last_nmse[k] = tr.nmse.back();
            hashes[si][k] = neighbors_hash(tr.neighbors);
        });
        for (int k = 0; k < n; ++k) {
            csv.raw(format_double(sigmas[si]) + "," + std::to_string(split.test[k]) + "," +
                    format_double(rmse[k]) + "," + format_double(last_nmse[k]) + "," +
                    hash_hex(hashes[si][k]));
            mean_rmse[si] += rmse[k] / n;
        }
    }

    // least-squares line through (sigma, mean rmse); the sigma = 0 row is a
    // reference floor and stays out of the fit
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m_ = static_cast<double>(sigmas.size() - 1);
    for (size_t i = 1; i < sigmas.size(); ++i) {
        sx += sigmas[i];
        sy += mean_rmse[i];
        sxx += sigmas[i] * sigmas[i];
        sxy += sigmas[i] * mean_rmse[i];
    }
    const double slope = (m_ * sxy - sx * sy) / (m_ * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / m_;
    double ss_res = 0, ss_tot = 0;
    for (size_t i = 1; i < sigmas.size(); ++i) {
        const double fit = slope * sigmas[i] + intercept;
        ss_res += (mean_rmse[i] - fit) * (mean_rmse[i] - fit);
        ss_tot += (mean_rmse[i] - sy / m_) * (mean_rmse[i] - sy / m_);
    }
    const double r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    bool stable = true;
    for (size_t si = 1; si < sigmas.size(); ++si)
        for (int k = 0; k < n; ++k) stable = stable && hashes[si][k] == hashes[0][k];

    CsvWriter fitcsv(out_path(cfg, "noise_fit.csv"), cfg.hash(),
                     "slope,intercept,r_squared,neighbors_stable");
    fitcsv.row().col(slope).col(intercept).col(r2).col(stable ? 1 : 0);
    std::printf("noise sweep: slope %.4f, intercept %.3e, R^2 %.6f, neighbors %s\n", slope,
                intercept, r2, stable ? "stable" : "CHANGED");
}

void cmd_scatter_scale(const RunConfig& cfg) {
    cfg.validate();
    Container c = open_dataset(cfg);
    const Split split = dataset_split(c, cfg);
    if (split.test.empty()) throw ConfigError("scatter-scale: dataset has no test images");
    const int pid = cfg.scale_phantom >= 0 ? cfg.scale_phantom : split.test.front();

    const auto pdoc = c.get_json("phantoms");
    const auto& plist = pdoc.at("phantoms");
    if (pid < 0 || pid >= static_cast<int>(plist.size()))
        throw ConfigError("scatter-scale: phantom index out of range");
    const ShellPhantom base = phantom_from_json(plist.at(pid));

    const Geometry geom = cfg.geometry();
    const Spectrum spec = spectrum_from_config(cfg);
    const AttenuationTable atten =
        cfg.mono_mode() ? AttenuationTable() : atten_from_config(cfg, spec);
    const ScatterOracleParams oracle = c.has_json("oracle_params")
                                           ? oracle_params_from_json(c.get_json("oracle_params"))
                                           : oracle_from_config(cfg);
    std::vector<RadPair> train_pairs;
    for (int i : split.train) train_pairs.push_back(load_pair(c, i));
    const DescatterOptions opt = descatter_options(cfg);

    double max_scale = 1.0;
    for (double f : cfg.scale_factors) max_scale = std::max(max_scale, f);
    const ReconConfig rc = recon_config(cfg, c, max_scale);

    CsvWriter csv(out_path(cfg, "scatter_scale.csv"), cfg.hash(),
                  "scale,scatter_direct_ratio,final_nmse,made_descattered,made_raw");
    for (double f : cfg.scale_factors) {
        ShellPhantom ph = base;
        for (double& d : ph.densities) d *= f;
        const ImageSet im = render_phantom(ph, geom, cfg, spec, atten, oracle);

        const Mask roi = im.direct.roi();
        double ratio = 0.0;
        for (size_t i = 0; i < im.direct.img.npix(); ++i)
            if (roi.at(i))
                ratio = std::max(ratio, im.scatter.img.vec()[i] / im.direct.img.vec()[i]);

        // the local candidates the paper builds around the (known) scaled
        // object: the same shells at perturbed densities
        std::vector<RadPair> pairs = train_pairs;
        for (double delta : cfg.perturb_deltas) {
            ShellPhantom pp = ph;
            for (double& d : pp.densities) d = std::max(0.05, d + delta);
            const ImageSet pim = render_phantom(pp, geom, cfg, spec, atten, oracle);
            pairs.push_back(RadPair{pim.direct, pim.scatter});
        }
        const TrainingSet ts = TrainingSet::build(std::move(pairs), cfg.nn_mask);

        DescatterTrace tr = descatter(im.total, ts, opt);
        const double made_desc = made(reconstruct(tr.final_direct, rc), im.truth);
        const double made_raw = made(reconstruct(im.total, rc), im.truth);
        csv.row().col(f).col(ratio).col(tr.nmse.back()).col(made_desc).col(made_raw);
        std::printf("scale %.2f: ratio %.3f, nmse %.3e, made %.5f (raw %.5f)\n", f, ratio,
                    tr.nmse.back(), made_desc, made_raw);
    }
}

}  // namespace descatter
