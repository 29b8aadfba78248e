#include <cstring>
#include <iostream>
#include <optional>
#include <string>

#include "uforge/errors.hpp"
#include "uforge/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Args {
  std::string command;
  std::string config_path;
  std::string out_dir;
  std::string method;
  std::string attack;
  std::optional<std::uint64_t> seed;
  std::size_t trial = 0;
  double extent = 1.0;
  std::size_t resolution = 21;
};

void print_usage() {
  std::cout
      << "Usage: unlearn_forge <command> [options]\n"
      << "Commands:\n"
      << "  train      Train the original model for every trial\n"
      << "  unlearn    Apply an unlearning method (--method)\n"
      << "  attack     Run a privacy attack on a victim (--attack, --method)\n"
      << "  report     Aggregate metrics, ROC curves, and summary\n"
      << "  landscape  Loss grids and a fine-tuning trajectory (--method)\n"
      << "Options:\n"
      << "  --config PATH   Experiment config file (required except report)\n"
      << "  --out DIR       Output directory (required)\n"
      << "  --seed N        Override the config's master seed\n"
      << "  --method NAME   retrain | ft | ga | rl | l1_sparse | our\n"
      << "  --attack NAME   rea_class | rea_sample | lira | up\n"
      << "  --trial N       Trial index for landscape (default 0)\n"
      << "  --extent X      Landscape half-width (default 1.0)\n"
      << "  --resolution N  Landscape grid resolution, odd (default 21)\n"
      << "Environment:\n"
      << "  " << uforge::harness::kThreadsEnvVar << "  caps parallel trials\n";
}

std::optional<Args> parse_args(int argc, char** argv) {
  if (argc < 2) return std::nullopt;
  Args args;
  args.command = argv[1];
  if (args.command == "--help" || args.command == "-h" || args.command == "help") {
    return std::nullopt;
  }
  for (int i = 2; i < argc; ++i) {
    const std::string arg = argv[i];
    const auto next = [&]() -> const char* {
      if (i + 1 >= argc) {
        std::cerr << "Missing value for " << arg << "\n";
        return nullptr;
      }
      return argv[++i];
    };
    if (arg == "--config") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.config_path = v;
    } else if (arg == "--out") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.out_dir = v;
    } else if (arg == "--method") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.method = v;
    } else if (arg == "--attack") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.attack = v;
    } else if (arg == "--seed") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.seed = std::stoull(v);
    } else if (arg == "--trial") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.trial = std::stoul(v);
    } else if (arg == "--extent") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.extent = std::stod(v);
    } else if (arg == "--resolution") {
      const char* v = next();
      if (!v) return std::nullopt;
      args.resolution = std::stoul(v);
    } else {
      std::cerr << "Unknown option: " << arg << "\n";
      return std::nullopt;
    }
  }
  return args;
}

uforge::harness::ExperimentConfig load_config(const Args& args) {
  if (args.config_path.empty()) {
    throw uforge::InvalidInputError("--config is required for this command");
  }
  auto kv = uforge::harness::KvConfig::parse_file(args.config_path);
  auto cfg = uforge::harness::experiment_config_from(kv);
  if (args.seed) cfg.master_seed = *args.seed;
  return cfg;
}

int run(const Args& args) {
  namespace h = uforge::harness;
  if (args.out_dir.empty()) {
    throw uforge::InvalidInputError("--out is required");
  }

  if (args.command == "train") {
    h::cmd_train(load_config(args), args.out_dir);
  } else if (args.command == "unlearn") {
    if (args.method.empty()) throw uforge::InvalidInputError("--method is required");
    h::cmd_unlearn(load_config(args), args.out_dir,
                   uforge::unlearn::method_from_name(args.method));
  } else if (args.command == "attack") {
    if (args.attack.empty()) throw uforge::InvalidInputError("--attack is required");
    if (args.method.empty()) throw uforge::InvalidInputError("--method is required");
    h::cmd_attack(load_config(args), args.out_dir, args.attack, args.method);
  } else if (args.command == "report") {
    h::cmd_report(args.out_dir);
  } else if (args.command == "landscape") {
    if (args.method.empty()) throw uforge::InvalidInputError("--method is required");
    h::cmd_landscape(load_config(args), args.out_dir, args.method, args.trial,
                     args.extent, args.resolution);
  } else {
    throw uforge::InvalidInputError("unknown command '" + args.command + "'");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc >= 2 && (std::strcmp(argv[1], "--help") == 0 || std::strcmp(argv[1], "-h") == 0 ||
                    std::strcmp(argv[1], "help") == 0)) {
    print_usage();
    return kExitOk;
  }
  const auto args = parse_args(argc, argv);
  if (!args) {
    print_usage();
    return kExitValidation;
  }
  try {
    return run(*args);
  } catch (const uforge::InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
