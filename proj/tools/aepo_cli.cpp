// SPDX-License-Identifier: Apache-2.0
// aepo: select, annotate and report on annotation-efficient preference data.
#include <csignal>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aepo/aepo.h"

namespace {

aepo_service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) aepo_service_stop(g_service);
}

int fail(aepo_status status) {
  std::fprintf(stderr, "aepo: %s: %s\n", aepo_status_name(status), aepo_last_error());
  return status == AEPO_ERR_INVALID_ARGUMENT ? 2 : 1;
}

void print_owned(char* text) {
  if (text == nullptr) return;
  std::fputs(text, stdout);
  if (text[0] != '\0' && text[std::char_traits<char>::length(text) - 1] != '\n') std::fputc('\n', stdout);
  aepo_string_free(text);
}

struct Flags {
  std::map<std::string, std::string> scalar;
  std::vector<std::string> selections;
  std::vector<std::string> preferences;
  bool lambda_sweep = false;
};

void add_flags(CLI::App* cmd, Flags& flags) {
  const std::vector<std::pair<const char*, const char*>> options = {
      {"input", "candidate pools (JSONL)"},
      {"embeddings", "response embeddings (JSONL or binary sidecar)"},
      {"scores", "reward score table (JSONL)"},
      {"perplexity", "perplexity score table (JSONL)"},
      {"output", "output file"},
      {"report", "report file"},
      {"strategy", "aepo|random|won|coreset|perplexity"},
      {"distance", "cosine|ngram"},
      {"max-n", "largest n-gram order for the ngram distance"},
      {"k", "responses annotated per instruction"},
      {"lambda", "diversity weight"},
      {"n-cap", "use only the first N responses of each pool"},
      {"solver", "exact|greedy|auto"},
      {"seed", "random seed"},
      {"budget", "matched|unconstrained"},
      {"enumeration-cap", "largest subset count the exact solver enumerates"},
      {"judge", "auto|table|remote|human"},
      {"concurrency", "worker threads (0: all cores)"},
      {"scorer-url", "remote scorer base URL"},
      {"timeout", "remote scorer timeout in milliseconds"},
      {"journal", "annotation session journal"},
      {"ui-dir", "static UI assets to serve"},
      {"host", "listen address"},
      {"port", "listen port (0: any free port)"},
  };
  for (const auto& [name, help] : options) {
    cmd->add_option(std::string("--") + name, flags.scalar[name], help);
  }
  cmd->add_option("--selection", flags.selections, "selection file (repeatable)");
  cmd->add_option("--preferences", flags.preferences, "preference file (repeatable)");
  cmd->add_flag("--lambda-sweep", flags.lambda_sweep, "run lambda in {0, 0.5, 1, 2}");
}

aepo_status build_config(const Flags& flags, aepo_config** out) {
  aepo_status status = aepo_config_create(out);
  if (status != AEPO_OK) return status;
  for (const auto& [key, value] : flags.scalar) {
    if (value.empty()) continue;
    if ((status = aepo_config_set(*out, key.c_str(), value.c_str())) != AEPO_OK) return status;
  }
  for (const auto& path : flags.selections) {
    if ((status = aepo_config_set(*out, "selection", path.c_str())) != AEPO_OK) return status;
  }
  for (const auto& path : flags.preferences) {
    if ((status = aepo_config_set(*out, "preferences", path.c_str())) != AEPO_OK) return status;
  }
  if (flags.lambda_sweep && (status = aepo_config_set(*out, "lambda-sweep", "true")) != AEPO_OK) return status;
  return aepo_config_validate(*out);
}

int run_command(const std::string& name, aepo_config* config) {
  aepo_status status = AEPO_OK;
  char* text = nullptr;
  if (name == "select") {
    size_t records = 0;
    status = aepo_run_select(config, &records);
    if (status == AEPO_OK) std::printf("selected %zu instructions\n", records);
  } else if (name == "annotate") {
    status = aepo_run_annotate(config, &text);
  } else if (name == "metrics") {
    status = aepo_run_metrics(config, &text);
  } else if (name == "pipeline") {
    status = aepo_run_pipeline(config, &text);
  } else if (name == "serve") {
    aepo_service* service = nullptr;
    status = aepo_service_create(config, &service);
    int port = 0;
    if (status == AEPO_OK) status = aepo_service_bind(service, &port);
    if (status == AEPO_OK) {
      g_service = service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::printf("serving on port %d\n", port);
      std::fflush(stdout);
      status = aepo_service_run(service);
      g_service = nullptr;
    }
    if (status != AEPO_OK) {
      const int code = fail(status);
      aepo_service_destroy(service);
      return code;
    }
    aepo_service_destroy(service);
    return 0;
  }
  if (status != AEPO_OK) return fail(status);
  print_owned(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annotation-efficient preference data construction"};
  app.require_subcommand(1);

  Flags flags;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"select", "choose the responses to annotate for every instruction"},
      {"annotate", "label selected responses and write preference pairs"},
      {"metrics", "report dataset statistics for selection files"},
      {"pipeline", "select, annotate and report in one run"},
      {"serve", "serve the human annotation session over HTTP"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

  CLI11_PARSE(app, argc, argv);

  aepo_config* config = nullptr;
  const aepo_status status = build_config(flags, &config);
  if (status != AEPO_OK) {
    const int code = fail(status);
    aepo_config_destroy(config);
    return code;
  }
  const int code = run_command(app.get_subcommands().front()->get_name(), config);
  aepo_config_destroy(config);
  return code;
}
