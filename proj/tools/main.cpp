#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "descatter/commands.hpp"
#include "descatter/errors.hpp"

using namespace descatter;

int main(int argc, char** argv) {
    RunConfig cfg;

    // Load --config before CLI11 binds the flags, so a flag wins over the file
    // no matter where it sits on the command line.
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string a = argv[i];
            if (a == "--config" && i + 1 < argc)
                cfg = RunConfig::from_file(argv[i + 1]);
            else if (a.rfind("--config=", 0) == 0)
                cfg = RunConfig::from_file(a.substr(9));
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }

    CLI::App app{"fixed-point scatter removal and Abel reconstruction for shell radiographs"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; flags override its values");

    app.add_option("--dataset", cfg.dataset_dir, "dataset container directory");
    app.add_option("--output", cfg.output_dir, "output directory for CSVs and payloads");
    app.add_option("--grid", cfg.grid_size, "detector grid size (4k+1)");
    app.add_option("--pitch", cfg.pixel_pitch, "pixel pitch in cm (0 = 12cm/(grid-1))");
    app.add_option("--roi", cfg.roi_radius, "circular region-of-interest radius in cm");
    app.add_option("--count", cfg.count, "phantoms in the dataset");
    app.add_option("--train", cfg.train_count, "training split size");
    app.add_option("--test", cfg.test_count, "test split size");
    app.add_option("--seed-dataset", cfg.seed_dataset, "phantom sampling seed");
    app.add_option("--seed-oracle", cfg.seed_oracle, "scatter oracle seed");
    app.add_option("--seed-noise", cfg.seed_noise, "detector noise seed");
    app.add_option("--spectrum", cfg.spectrum, "'mono:<xi>', 'builtin', or a CSV path");
    app.add_option("--attenuation", cfg.attenuation, "'builtin' or a CSV path");
    app.add_option("--oracle-params", cfg.oracle_params, "scatter oracle parameter JSON");
    app.add_option("--model", cfg.model,
                   "single-field | convolutional | parametric | multikernel");
    app.add_option("--mode", cfg.mode, "local | global");
    app.add_option("--neighbors,-G", cfg.neighbors, "local-fit neighborhood size");
    app.add_option("--iters", cfg.iters, "descattering fixed-point iterations");
    app.add_option("--cg-iters", cfg.cg_iters, "CG iterations for the convolutional fit");
    app.add_option("--lbfgs-iters", cfg.lbfgs_iters, "L-BFGS iterations for kernel fits");
    app.add_option("--regions", cfg.regions, "multikernel region count");
    app.add_option("--early-stop", cfg.early_stop_nmse, "stop when NMSE falls below (0 = off)");
    app.add_flag("--nn-mask,!--no-nn-mask", cfg.nn_mask,
                 "restrict neighbor distances to the ROI");
    app.add_flag("--nn-on-total,!--nn-on-iterate", cfg.nn_on_total,
                 "search neighbors of the raw total instead of the iterate");
    app.add_option("--lut-size", cfg.lut_size, "transmission lookup table length");
    app.add_option("--rho-max-factor", cfg.rho_max_factor,
                   "lookup table reach as a multiple of the densest chord");
    app.add_option("--nuisance-levels", cfg.nuisance_levels, "quantized nuisance table count");
    app.add_option("--noise-sigmas", cfg.noise_sigmas, "AWGN levels for the noise sweep");
    app.add_option("--scale-factors", cfg.scale_factors, "density scales for scatter-scale");
    app.add_option("--perturb-deltas", cfg.perturb_deltas,
                   "density offsets for the scaled training variants");
    app.add_option("--scale-phantom", cfg.scale_phantom,
                   "phantom index for scatter-scale (-1 = first test phantom)");
    app.add_option("--sweep", cfg.sweep_neighbors, "neighborhood sizes for sweep-neighbors");
    app.add_option("--threads", cfg.threads, "worker threads (0 = DESCATTER_THREADS or hardware)");

    auto* c_generate = app.add_subcommand("generate", "synthesize a phantom dataset container");
    auto* c_fit = app.add_subcommand("fit", "fit a scatter model and save it as JSON");
    auto* c_descatter = app.add_subcommand("descatter", "run the fixed point on the test images");
    auto* c_reconstruct =
        app.add_subcommand("reconstruct", "invert transmission and recover the central slice");
    auto* c_eval = app.add_subcommand("eval", "full model/mode evaluation grid with summaries");
    auto* c_oracle = app.add_subcommand(
        "oracle-fit", "fit each model on a single true direct/scatter pair per test image");
    auto* c_estimation = app.add_subcommand(
        "scatter-estimation", "predict scatter from the known direct and compare to descattering");
    auto* c_sweep = app.add_subcommand("sweep-neighbors", "descatter across neighborhood sizes");
    auto* c_noise = app.add_subcommand("noise", "descatter under AWGN and fit RMSE vs sigma");
    auto* c_scale =
        app.add_subcommand("scatter-scale", "rescale one phantom's densities and re-descatter");

    std::string entry, truth_entry, nuisance_entry, nuisance_atten;
    c_reconstruct->add_option("--entry", entry, "container entry to invert")->required();
    c_reconstruct->add_option("--truth", truth_entry, "density slice entry for the error report");
    c_reconstruct->add_option("--nuisance-map", nuisance_entry,
                              "entry holding the known nuisance areal density");
    c_reconstruct->add_option("--nuisance-atten", nuisance_atten,
                              "CSV attenuation table of the nuisance material");

    for (auto* s : {c_generate, c_fit, c_descatter, c_reconstruct, c_eval, c_oracle, c_estimation,
                    c_sweep, c_noise, c_scale})
        s->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_generate->parsed()) cmd_generate(cfg);
        else if (c_fit->parsed()) cmd_fit(cfg);
        else if (c_descatter->parsed()) cmd_descatter(cfg);
        else if (c_reconstruct->parsed())
            cmd_reconstruct(cfg, entry, truth_entry, nuisance_entry, nuisance_atten);
        else if (c_eval->parsed()) cmd_eval(cfg);
        else if (c_oracle->parsed()) cmd_oracle_fit(cfg);
        else if (c_estimation->parsed()) cmd_scatter_estimation(cfg);
        else if (c_sweep->parsed()) cmd_sweep_neighbors(cfg);
        else if (c_noise->parsed()) cmd_noise(cfg);
        else if (c_scale->parsed()) cmd_scatter_scale(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    }
    return 0;
}
