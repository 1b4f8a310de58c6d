#include <algorithm>
#include <filesystem>

#include "CLI11.hpp"
#include "fairscrub/error.hpp"
#include "fairscrub_cli/commands.hpp"

namespace fairscrub::cli {
namespace {

void add_options(CLI::App& app, Options& o) {
  app.set_config("--config", "", "TOML-style key = value file; command-line flags take precedence");

  app.add_option("--out", o.out, "Run directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Master seed")->capture_default_str();

  auto* data = "Data";
  app.add_option("--examples", o.examples, "Synthetic corpus size")->group(data)->capture_default_str();
  app.add_option("--dim", o.dim, "Synthetic feature dimension")->group(data)->capture_default_str();
  app.add_option("--y-arity", o.y_arity, "Number of target classes")->group(data)->capture_default_str();
  app.add_option("--z-arities", o.z_arities, "Classes per protected attribute")
      ->group(data)->delimiter(',')->capture_default_str();
  app.add_option("--y-strength", o.y_strength, "Target signal strength")->group(data)->capture_default_str();
  app.add_option("--z-strengths", o.z_strengths, "Signal strength per protected attribute")
      ->group(data)->delimiter(',')->capture_default_str();
  app.add_option("--overlap", o.overlap, "Cosine between each z direction and the y subspace")
      ->group(data)->capture_default_str();
  app.add_option("--noise-sigma", o.noise_sigma, "Isotropic noise scale")->group(data)->capture_default_str();
  app.add_option("--split", o.split, "train,dev,test ratios")->group(data)->delimiter(',')->capture_default_str();
  app.add_option("--tsv", o.tsv, "Featurize a text\\ty\\tz1... file instead of generating")->group(data);
  app.add_option("--hash-dim", o.hash_dim, "Feature-hashing width for --tsv")->group(data)->capture_default_str();

  auto* model = "Model";
  app.add_option("--embed", o.embed, "Encoder output width")->group(model)->capture_default_str();
  app.add_option("--scrubbed", o.scrubbed, "Scrubber output width")->group(model)->capture_default_str();
  app.add_option("--hidden", o.hidden, "Hidden width of encoder and scrubber")->group(model)->capture_default_str();

  auto* train = "Training";
  app.add_option("--regime", o.regime, "Training regime")
      ->group(train)->check(CLI::IsMember({"ads", "no-adversary"}))->capture_default_str();
  app.add_option("--name", o.name, "Model directory name (default: the regime)")->group(train);
  app.add_option("--lambda1", o.lambda1, "Entropy weight")->group(train)->capture_default_str();
  app.add_option("--lambda2", o.lambda2, "Delta-loss weight")->group(train)->capture_default_str();
  app.add_option("--tau", o.tau, "Gumbel-softmax temperature")->group(train)->capture_default_str();
  app.add_flag("--no-gumbel", o.no_gumbel, "Deterministic delta (no Gumbel noise)")->group(train);
  app.add_option("--epochs", o.epochs, "Training epochs")->group(train)->capture_default_str();
  app.add_option("--batch-size", o.batch_size, "Minibatch size")->group(train)->capture_default_str();
  app.add_option("--lr", o.lr, "AdamW learning rate")->group(train)->capture_default_str();
  app.add_option("--weight-decay", o.weight_decay, "AdamW decoupled weight decay")
      ->group(train)->capture_default_str();
  app.add_option("--disc-steps", o.disc_steps, "Discriminator updates per scrubber update")
      ->group(train)->capture_default_str();
  app.add_option("--clip-norm", o.clip_norm, "Global gradient-norm clip per phase (<= 0 disables)")
      ->group(train)->capture_default_str();
  app.add_option("--protect", o.protect, "Protected attributes given a discriminator (default: all)")
      ->group(train)->delimiter(',');

  auto* probe = "Probing";
  app.add_option("--taps", o.taps, "Representation taps (default: all four)")->group(probe)->delimiter(',');
  app.add_option("--attrs", o.attrs, "Attributes to probe, e.g. y,z1 (default: all)")
      ->group(probe)->delimiter(',');
  app.add_option("--schedule", o.schedule, "Online-code block fractions, e.g. 0.1,0.5,1")->group(probe);
  app.add_option("--ads-model", o.ads_model, "Model read by the ads-* taps")->group(probe)->capture_default_str();
  app.add_option("--finetuned-model", o.finetuned_model, "Model read by the finetuned-encoder tap")
      ->group(probe)->capture_default_str();
  app.add_option("--eval-split", o.eval_split, "Split to probe")
      ->group(probe)->check(CLI::IsMember({"train", "dev", "test"}))->capture_default_str();
  app.add_flag("--no-mdl", o.no_mdl, "Skip the online code (F1 only)")->group(probe);
  app.add_flag("--shuffle-labels", o.shuffle_labels, "Permuted-label control run")->group(probe);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options opts;
  CLI::App app{"Adversarial scrubbing of protected attributes with MDL probing", "fairscrub"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  add_options(app, opts);
  for (auto* opt : app.get_options()) {
    if (opt->get_items_expected_max() == 1) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  using Command = int (*)(const Options&, std::ostream&, std::ostream&);
  const std::pair<const char*, std::pair<const char*, Command>> commands[] = {
      {"generate", {"Write train/dev/test JSONL splits and a summary", cmd_generate}},
      {"train", {"Train one regime and write checkpoint.json and trace.csv", cmd_train}},
      {"probe", {"Probe representation taps and write one JSON report per tap and attribute", cmd_probe}},
      {"ablate", {"Train and probe the entropy-only, delta-only and combined scrubbers", cmd_ablate}},
      {"report", {"Consolidated CSV, text tables and representation dumps", cmd_report}},
      {"run", {"generate, train both regimes, probe, report", cmd_run}},
  };
  Command chosen = nullptr;
  for (const auto& [name, info] : commands) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->callback([&chosen, fn = info.second] { chosen = fn; });
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    return chosen(opts, out, err);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fairscrub::cli
