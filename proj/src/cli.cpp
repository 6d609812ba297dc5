#include "sgs/cli.hpp"

#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "sgs/runner.hpp"

namespace sgs::cli {

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Foreground/background consistency checker for precomputed crop pairs", "sgs-check"};
    app.set_config("--config", "", "TOML/INI file supplying default flag values");
    app.get_formatter()->column_width(34);

    RunConfig cfg;
    std::string mode = "score";
    std::string policy = "skip_on_mismatch";
    std::string sd = "sample";
    std::string pairs_csv, ids_json, fg_dir, bg_dir, out_path, scores, helper;
    std::string joint, vision, vlm;
    std::string role_template = kDefaultRoleTemplate, role = kDefaultRole, role_text;
    std::string downstream_cmd, downstream_url;
    std::vector<std::string> extensions = default_extensions();

    app.add_option("--mode", mode, "score | baseline_gap | baseline_distance | baseline_vlm | cascade | evaluate")
        ->capture_default_str()
        ->check(CLI::IsMember({"score", "baseline_gap", "baseline_distance", "baseline_vlm", "cascade",
                               "evaluate"}));

    auto* g_in = app.add_option_group("pairing");
    g_in->add_option("--pairs-csv", pairs_csv, "manifest with id,fg,bg columns");
    g_in->add_option("--ids-json", ids_json, "JSON list of ids resolved under --fg-dir/--bg-dir");
    g_in->add_option("--fg-dir", fg_dir, "foreground crop directory");
    g_in->add_option("--bg-dir", bg_dir, "background crop directory");
    g_in->add_option("--extensions", extensions, "extension priority for id/stem resolution")
        ->capture_default_str()
        ->delimiter(',');

    app.add_option("--out", out_path, "output CSV (metrics JSON in evaluate mode)");
    app.add_option("--tau", cfg.tau, "Match threshold on sts01")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    app.add_option("--jobs", cfg.jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--seed", cfg.seed, "seed handed to stochastic adapters")->capture_default_str();
    app.add_option("--sd", sd, "standard deviation formula: sample | population")
        ->capture_default_str()
        ->check(CLI::IsMember({"sample", "population"}));

    auto* g_be = app.add_option_group("backends");
    g_be->add_option("--captioner", cfg.backends.captioner_id, "captioner id ('stub' or a model id)")
        ->capture_default_str();
    g_be->add_option("--encoder", cfg.backends.encoder_id, "sentence encoder id ('stub' or a model id)")
        ->capture_default_str();
    g_be->add_option("--max-tokens", cfg.backends.max_tokens, "caption token budget")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    g_be->add_option("--precision", "numeric precision (only fp32)")->check(CLI::IsMember({"fp32"}));
    g_be->add_option("--joint-encoder", joint, "image-text encoder for baseline_gap");
    g_be->add_option("--vision-encoder", vision, "vision encoder for baseline_distance");
    g_be->add_option("--vlm", vlm, "VLM for baseline_vlm");
    g_be->add_option("--helper", helper, "command line of the model helper process");

    auto* g_bl = app.add_option_group("baselines");
    g_bl->add_option("--role-text", role_text, "role prompt for the gap test (overrides --role)");
    g_bl->add_option("--role-template", role_template, "template with a {role} placeholder")->capture_default_str();
    g_bl->add_option("--role", role, "role substituted into the template")->capture_default_str();
    g_bl->add_option("--vlm-prompt", cfg.vlm_prompt, "yes/no question for baseline_vlm");

    auto* g_cas = app.add_option_group("cascade");
    g_cas->add_option("--policy", policy, "skip_on_mismatch | forward_on_mismatch")
        ->capture_default_str()
        ->check(CLI::IsMember({"skip_on_mismatch", "forward_on_mismatch"}));
    g_cas->add_option("--downstream-cmd", downstream_cmd,
                      "detector command template ({id} {fg_path} {bg_path} {sts01} {label} {flagged})");
    g_cas->add_option("--downstream-url", downstream_url, "detector HTTP endpoint");
    g_cas->add_option("--downstream-timeout", cfg.downstream.timeout_seconds, "seconds per downstream call")
        ->capture_default_str();
    g_cas->add_option("--max-in-flight", cfg.downstream.max_in_flight, "concurrent downstream calls")
        ->capture_default_str();

    auto* g_ev = app.add_option_group("evaluate");
    g_ev->add_option("--scores", scores, "score CSV to evaluate");
    g_ev->add_option("--sweep", cfg.sweep_taus, "taus for a threshold sweep")->delimiter(',');
    g_ev->add_option("--calibrate-target", cfg.calibrate_target, "flag rate to calibrate tau for");

    std::vector<std::string> argv_storage{"sgs-check"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_storage) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_code::kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return exit_code::kUsage;
    }

    cfg.mode = *parse_run_mode(mode);
    cfg.policy = policy == "forward_on_mismatch" ? MismatchPolicy::ForwardOnMismatch
                                                 : MismatchPolicy::SkipOnMismatch;
    cfg.sd = sd == "population" ? SdFormula::Population : SdFormula::Sample;
    cfg.out_path = out_path;
    if (!scores.empty()) cfg.scores_path = scores;
    cfg.backends.seed = cfg.seed;
    if (!joint.empty()) cfg.backends.joint_encoder_id = joint;
    if (!vision.empty()) cfg.backends.vision_encoder_id = vision;
    if (!vlm.empty()) cfg.backends.vlm_id = vlm;
    if (!helper.empty()) {
        std::istringstream words(helper);
        for (std::string w; words >> w;) cfg.backends.helper_command.push_back(w);
    }
    cfg.role_text = role_text.empty() ? render_role_prompt(role_template, role) : role_text;
    if (!downstream_cmd.empty()) cfg.downstream.command = downstream_cmd;
    if (!downstream_url.empty()) cfg.downstream.url = downstream_url;

    auto& p = cfg.pairing;
    p.extensions = extensions;
    if (!pairs_csv.empty()) {
        p.mode = PairingMode::ManifestCsv;
        p.manifest_path = pairs_csv;
    } else if (!ids_json.empty()) {
        p.mode = PairingMode::IdListJson;
        p.ids_path = ids_json;
    } else {
        p.mode = PairingMode::AutoStem;
    }
    if (!fg_dir.empty()) p.fg_dir = fg_dir;
    if (!bg_dir.empty()) p.bg_dir = bg_dir;

    return run(cfg, out, err);
}

}  // namespace sgs::cli
