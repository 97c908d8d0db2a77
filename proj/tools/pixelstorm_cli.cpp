// pixelstorm: few-pixel differential-evolution attack campaigns.
//
//   pixelstorm attack   --dataset test_batch.bin --oracle builtin:model.bin --mode targeted --out runs/a
//   pixelstorm baseline --manifest images.txt --oracle remote:http://localhost:8000 --out runs/b
//   pixelstorm report   runs/a
//   pixelstorm make-model --kind linear --width 32 --height 32 --channels 3 --classes 10 --out m.bin
//
// Every campaign flag can also come from `--config FILE` holding flat
// key=value lines (key = flag name without dashes); flags on the command
// line win.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pixelstorm/pixelstorm.hpp"

namespace {

using namespace pixelstorm;

/// Reads key=value lines, '#' comments allowed.
std::map<std::string, std::string> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open config " + path);
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#')
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

/// Splices config entries in front of the command-line flags, skipping
/// keys the command line already sets.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::string config;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& a = args[i];
        if (a == "--config" && i + 1 < args.size()) {
            config = args[++i];
            continue;
        }
        if (a.rfind("--config=", 0) == 0) {
            config = a.substr(9);
            continue;
        }
        if (a.rfind("--", 0) == 0) {
            const auto eq = a.find('=');
            given.insert(a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2));
        }
        out.push_back(a);
    }
    if (config.empty() || out.empty())
        return out;
    std::vector<std::string> merged{out.front()};  // subcommand
    for (const auto& [key, value] : read_config(config))
        if (!given.count(key))
            merged.push_back("--" + key + "=" + value);
    merged.insert(merged.end(), out.begin() + 1, out.end());
    return merged;
}

void add_campaign_flags(CLI::App& cmd, CampaignConfig& c, std::string& mode, std::string& preset) {
    cmd.add_option("--dataset", c.dataset, "CIFAR-10 binary batch file");
    cmd.add_option("--manifest", c.manifest, "PNG manifest (<path>,<true_class> per line)");
    cmd.add_option("--oracle", c.oracle, "builtin:<weights> or remote:<url> (default: $PIXELSTORM_ORACLE_URL)");
    cmd.add_option("--preset", preset, "kaggle | original | imagenet")->check(CLI::IsMember({"kaggle", "original", "imagenet"}));
    cmd.add_option("--mode", mode, "targeted | nontargeted")->check(CLI::IsMember({"targeted", "nontargeted"}));
    cmd.add_option("--pixels", c.pixels, "pixel budget d");
    cmd.add_option("--population", c.population, "override the preset population size");
    cmd.add_option("--generations", c.generations, "override the preset generation count");
    cmd.add_option("--images", c.images, "number of correctly classified images to attack (0 = all)");
    cmd.add_option("--sample-seed", c.sample_seed, "image sampling seed");
    cmd.add_option("--de-seed", c.de_seed, "optimizer seed");
    cmd.add_option("--out", c.out, "output directory")->required();
    cmd.add_option("--workers", c.workers, "parallel images");
}

int finish(const CampaignResult& r, const std::filesystem::path& out) {
    std::cout << "images: " << r.images_completed << "/" << r.images_planned << "\n";
    if (r.report) {
        const auto& rep = *r.report;
        if (rep.success_rate_targeted)
            std::cout << "targeted success rate: " << *rep.success_rate_targeted << "\n";
        if (rep.success_rate_nontargeted)
            std::cout << "non-targeted success rate: " << *rep.success_rate_nontargeted << "\n";
        if (rep.confidence)
            std::cout << "confidence: " << *rep.confidence << "\n";
        std::cout << "report: " << (out / "report.json").string() << "\n";
    }
    if (!r.complete()) {
        std::cerr << "campaign incomplete: " << (r.error.empty() ? "not all images finished" : r.error)
                  << "\npartial outcomes kept under " << (out / "outcomes").string() << "\n";
        return 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-pixel differential-evolution attacks against probability-label classifiers"};
    app.require_subcommand(1);

    CampaignConfig attack_cfg;
    std::string attack_mode = "nontargeted", attack_preset = "kaggle";
    auto* attack = app.add_subcommand("attack", "run a DE attack campaign");
    add_campaign_flags(*attack, attack_cfg, attack_mode, attack_preset);

    CampaignConfig base_cfg;
    std::string base_mode = "nontargeted", base_preset = "kaggle";
    auto* baseline = app.add_subcommand("baseline", "run the random one-pixel baseline");
    add_campaign_flags(*baseline, base_cfg, base_mode, base_preset);
    baseline->add_option("--attempts", base_cfg.attempts, "random attempts per image");

    std::string report_dir;
    auto* report = app.add_subcommand("report", "recompute report.json from stored outcomes");
    report->add_option("dir", report_dir, "campaign output directory")->required();

    std::string kind = "linear", model_out;
    OracleInfo model_info{32, 32, 3, 10, {}};
    std::uint64_t model_seed = 0;
    double weight_sigma = 0.05, dense_sigma = 4.0;
    std::size_t filters = 8;
    auto* make_model = app.add_subcommand("make-model", "write a random built-in oracle weight file");
    make_model->add_option("--kind", kind, "linear | cnn")->check(CLI::IsMember({"linear", "cnn"}));
    make_model->add_option("--width", model_info.width);
    make_model->add_option("--height", model_info.height);
    make_model->add_option("--channels", model_info.channels);
    make_model->add_option("--classes", model_info.num_classes);
    make_model->add_option("--filters", filters, "cnn feature maps");
    make_model->add_option("--seed", model_seed);
    make_model->add_option("--weight-sigma", weight_sigma, "stddev of linear / conv weights");
    make_model->add_option("--dense-sigma", dense_sigma, "stddev of cnn dense weights");
    make_model->add_option("--out", model_out)->required();

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        if (!args.empty())
            args = merge_config(args);
        std::vector<const char*> cargs{argv[0]};
        for (const auto& a : args)
            cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 64;
    }

    try {
        if (*attack || *baseline) {
            const bool is_attack = static_cast<bool>(*attack);
            CampaignConfig& c = is_attack ? attack_cfg : base_cfg;
            c.mode = parse_attack_mode(is_attack ? attack_mode : base_mode);
            c.preset = parse_preset(is_attack ? attack_preset : base_preset);
            auto oracle = make_oracle(c.oracle);
            CountingOracle counted(*oracle);
            auto result = is_attack ? run_attack_campaign(c, counted) : run_baseline_campaign(c, counted);
            std::cout << "oracle evaluations: " << counted.count() << "\n";
            return finish(result, c.out);
        }
        if (*report) {
            auto r = report_from_directory(report_dir);
            std::cout << report_to_json(r).dump(2) << "\n";
            return 0;
        }
        if (*make_model) {
            if (kind == "linear")
                save_builtin_oracle(model_out, LinearSoftmaxOracle::random(model_info, model_seed, weight_sigma));
            else
                save_builtin_oracle(model_out, PocketCnnOracle::random(model_info, model_seed, filters,
                                                                       weight_sigma, dense_sigma));
            return 0;
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 64;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
