#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace fairscrub::cli {

/// Every knob the subcommands read. Each command uses the subset it needs;
/// the same flat key set is accepted from the config file.
struct Options {
  std::filesystem::path out = "run";
  std::uint64_t seed = 1;

  // data
  std::size_t examples = 20000;
  std::size_t dim = 64;
  std::size_t y_arity = 2;
  std::vector<std::size_t> z_arities{2};
  double y_strength = 0.8;
  std::vector<double> z_strengths{0.8};
  double overlap = 0.3;
  double noise_sigma = 0.7;
  std::vector<double> split{0.65, 0.10, 0.25};
  std::string tsv;  // featurize this file instead of generating
  std::size_t hash_dim = 1024;

  // model
  std::size_t embed = 32;
  std::size_t scrubbed = 32;
  std::size_t hidden = 32;

  // training
  std::string regime = "ads";
  std::string name;  // model directory; defaults to the regime name
  double lambda1 = 10.0;
  double lambda2 = 0.0;
  double tau = 1.0;
  bool no_gumbel = false;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 0.01;
  std::size_t disc_steps = 1;
  double clip_norm = 5.0;
  std::vector<std::string> protect;  // attributes given a discriminator; empty = all

  // probing
  std::vector<std::string> taps;   // empty = all four
  std::vector<std::string> attrs;  // empty = y and every z
  std::string schedule;            // empty = default fractions
  std::string ads_model = "ads";
  std::string finetuned_model = "no-adversary";
  std::string eval_split = "test";
  bool no_mdl = false;
  bool shuffle_labels = false;
};

int cmd_generate(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_train(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_probe(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_ablate(const Options& opts, std::ostream& out, std::ostream& err);
int cmd_report(const Options& opts, std::ostream& out, std::ostream& err);
/// generate, train both regimes, probe every tap, report.
int cmd_run(const Options& opts, std::ostream& out, std::ostream& err);

/// Parses argv (without the program name), dispatches, and maps library
/// exceptions onto exit codes: 2 usage/config, 3 numerical, 4 I/O.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fairscrub::cli
