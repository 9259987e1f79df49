/**
 * Copyright 2026 The HetMatch Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// hetmatch: command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hetmatch/hetmatch.h"

namespace {

struct Failure {
  hm_status status;
  std::string message;
};

void check(hm_status s) {
  if (s != HM_OK) throw Failure{s, hm_last_error()};
}

struct CString {
  char* p = nullptr;
  ~CString() { hm_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

using ConfigPtr = std::unique_ptr<hm_config, decltype(&hm_config_free)>;
using DatasetPtr = std::unique_ptr<hm_dataset, decltype(&hm_dataset_free)>;
using ModelPtr = std::unique_ptr<hm_model, decltype(&hm_model_free)>;

/// Output files of the running command; removed if the command fails.
std::vector<std::string> g_outputs;

void write_text(const std::string& path, const std::string& body) {
  g_outputs.push_back(path);
  const auto tmp = path + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw Failure{HM_ERR_DATA, "cannot write " + path};
  const bool ok = std::fwrite(body.data(), 1, body.size(), f) == body.size();
  if (std::fclose(f) != 0 || !ok) {
    std::filesystem::remove(tmp);
    throw Failure{HM_ERR_DATA, "write failed for " + path};
  }
  std::filesystem::rename(tmp, path);
}

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;  // flag overrides, applied last
};

struct DataOptions {
  std::string dir, edges, nodes, labels, task;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("-c,--config", o.config_path, "key = value configuration file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", o.sets, "override one key (key=value), repeatable");
}

void add_flag_key(CLI::App* cmd, CommonOptions& o, const std::string& flag, const std::string& key,
                  const std::string& help) {
  cmd->add_option_function<std::string>(
      flag, [&o, key](const std::string& v) { o.flags[key] = v; }, help);
}

void add_data(CLI::App* cmd, DataOptions& d, bool need_labels, bool need_task) {
  cmd->add_option("--data", d.dir, "dataset directory with the standard file names");
  cmd->add_option("--edges", d.edges, "edge file");
  cmd->add_option("--nodes", d.nodes, "node file");
  if (need_labels) cmd->add_option("--labels", d.labels, "labels file");
  if (need_task) cmd->add_option("--task", d.task, "evaluation task file");
}

ConfigPtr make_config(const CommonOptions& o) {
  hm_config* raw = nullptr;
  check(hm_config_new(&raw));
  ConfigPtr cfg(raw, hm_config_free);
  if (!o.config_path.empty()) check(hm_config_load(cfg.get(), o.config_path.c_str()));
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw Failure{HM_ERR_USAGE, "--set expects key=value, got " + s};
    check(hm_config_set(cfg.get(), s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()));
  }
  for (const auto& [k, v] : o.flags) check(hm_config_set(cfg.get(), k.c_str(), v.c_str()));
  return cfg;
}

DatasetPtr load_data(const DataOptions& d, bool need_labels, bool need_task) {
  auto pick = [&](const std::string& explicit_path, const char* file) {
    if (!explicit_path.empty()) return explicit_path;
    if (!d.dir.empty()) return d.dir + "/" + file;
    return std::string();
  };
  const std::string edges = pick(d.edges, "edges.tsv");
  const std::string nodes = pick(d.nodes, "nodes.tsv");
  const std::string labels = need_labels ? pick(d.labels, "labels.tsv") : std::string();
  const std::string task = need_task ? pick(d.task, "eval_task.tsv") : std::string();
  if (edges.empty() || nodes.empty())
    throw Failure{HM_ERR_USAGE, "give --data or both --edges and --nodes"};
  hm_dataset* raw = nullptr;
  check(hm_dataset_load(edges.c_str(), nodes.c_str(), labels.empty() ? nullptr : labels.c_str(),
                        task.empty() ? nullptr : task.c_str(), &raw));
  return DatasetPtr(raw, hm_dataset_free);
}

std::string describe(const hm_config* cfg) {
  CString s;
  check(hm_config_describe(cfg, &s.p));
  return s.str();
}

std::string summary(const hm_dataset* ds) {
  CString s;
  check(hm_dataset_summary(ds, &s.p));
  return s.str();
}

void write_manifest(const std::string& output, const std::string& command, const hm_config* cfg,
                    const hm_dataset* ds, const std::string& extra = {}) {
  std::string body = "command = " + command + "\n";
  body += describe(cfg);
  if (ds) body += summary(ds);
  body += extra;
  write_text(output + ".manifest", body);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HetMatch keyword matching pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hm_version()));

  CommonOptions common;
  DataOptions data;
  std::string out, checkpoint, embeddings, retrieved;
  std::size_t depth = 0;
  double tolerance = -1.0;

  auto* synth = app.add_subcommand("synth-gen", "generate a synthetic dataset");
  add_common(synth, common);
  add_flag_key(synth, common, "--seed", "synth.seed", "generator seed");
  synth->add_option("--out", out, "output directory")->required();

  auto* build = app.add_subcommand("build-graph", "validate inputs and summarise the graph");
  add_common(build, common);
  add_data(build, data, true, true);
  build->add_option("--out", out, "summary file")->required();

  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(train, common);
  add_data(train, data, true, false);
  for (const char* k : {"epochs", "seed", "batch_size", "learning_rate", "d", "l", "m", "kappa",
                        "negatives", "gamma", "variant"})
    add_flag_key(train, common, std::string("--") + k, k, std::string("override ") + k);
  train->add_option("--checkpoint", checkpoint, "checkpoint output")->required();

  auto* embed = app.add_subcommand("embed", "export view embeddings of a checkpoint");
  add_common(embed, common);
  add_data(embed, data, false, false);
  embed->add_option("--checkpoint", checkpoint, "trained checkpoint")->required()->check(
      CLI::ExistingFile);
  embed->add_option("--out", out, "embedding dump")->required();

  auto* retrieve = app.add_subcommand("retrieve", "top-K keywords per task ad and view");
  add_common(retrieve, common);
  add_data(retrieve, data, false, true);
  retrieve->add_option("--embeddings", embeddings, "embedding dump")->required()->check(
      CLI::ExistingFile);
  retrieve->add_option("-k,--depth", depth, "list length per view")->required();
  retrieve->add_option("--out", out, "retrieved lists")->required();

  auto* evaluate = app.add_subcommand("evaluate", "score retrieved lists against the task");
  add_common(evaluate, common);
  add_data(evaluate, data, false, true);
  add_flag_key(evaluate, common, "--ks", "ks", "comma list of K values");
  evaluate->add_option("--retrieved", retrieved, "retrieved lists")->required()->check(
      CLI::ExistingFile);
  evaluate->add_option("--out", out, "report (a .tsv twin is written alongside)")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheck, common);
  add_data(gradcheck, data, true, false);
  for (const char* k : {"d", "l", "probes", "fd_epsilon", "seed", "variant"})
    add_flag_key(gradcheck, common, std::string("--") + k, k, std::string("override ") + k);
  gradcheck->add_option("--tolerance", tolerance,
                        "exit with status 4 when the max relative error exceeds this");
  gradcheck->add_option("--out", out, "probe report")->required();

  auto* ablate = app.add_subcommand("ablate", "train and evaluate every variant");
  add_common(ablate, common);
  add_data(ablate, data, true, true);
  for (const char* k : {"epochs", "seed", "learning_rate", "ks", "variants"})
    add_flag_key(ablate, common, std::string("--") + k, k, std::string("override ") + k);
  ablate->add_option("--out", out, "report (a .tsv twin is written alongside)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : HM_ERR_USAGE;
  }

  try {
    if (synth->parsed()) {
      auto cfg = make_config(common);
      if (!std::filesystem::exists(out))
        g_outputs.push_back(out);
      else
        for (const char* f : {"edges.tsv", "nodes.tsv", "labels.tsv", "eval_task.tsv",
                              "synth_manifest.txt"})
          g_outputs.push_back(out + "/" + f);
      check(hm_synth_generate(cfg.get(), out.c_str()));
    } else if (build->parsed()) {
      auto cfg = make_config(common);
      auto ds = load_data(data, true, true);
      write_text(out, summary(ds.get()));
      write_manifest(out, "build-graph", cfg.get(), ds.get());
    } else if (train->parsed()) {
      auto cfg = make_config(common);
      auto ds = load_data(data, true, false);
      hm_model* raw = nullptr;
      check(hm_train(ds.get(), cfg.get(), &raw));
      ModelPtr model(raw, hm_model_free);
      g_outputs.push_back(checkpoint);
      check(hm_model_save(model.get(), checkpoint.c_str()));
      CString manifest, losses;
      check(hm_model_manifest(model.get(), &manifest.p));
      check(hm_model_loss_log(model.get(), &losses.p));
      write_text(checkpoint + ".manifest", "command = train\n" + manifest.str());
      write_text(checkpoint + ".losses", losses.str());
    } else if (embed->parsed()) {
      auto cfg = make_config(common);
      auto ds = load_data(data, false, false);
      hm_model* raw = nullptr;
      check(hm_model_load(checkpoint.c_str(), &raw));
      ModelPtr model(raw, hm_model_free);
      check(hm_model_check_config(model.get(), cfg.get()));
      g_outputs.push_back(out);
      check(hm_embed(model.get(), ds.get(), out.c_str()));
      write_manifest(out, "embed", cfg.get(), ds.get(), "checkpoint = " + checkpoint + "\n");
    } else if (retrieve->parsed()) {
      auto cfg = make_config(common);
      auto ds = load_data(data, false, true);
      g_outputs.push_back(out);
      check(hm_retrieve(embeddings.c_str(), ds.get(), depth, out.c_str()));
      write_manifest(out, "retrieve", cfg.get(), ds.get(), "embeddings = " + embeddings + "\n");
    } else if (evaluate->parsed()) {
      auto cfg = make_config(common);
      auto ds = load_data(data, false, true);
      CString report, tsv;
      check(hm_evaluate(ds.get(), retrieved.c_str(), cfg.get(), &report.p, &tsv.p));
      write_text(out, report.str());
      write_text(out + ".tsv", tsv.str());
      write_manifest(out, "evaluate", cfg.get(), ds.get(), "retrieved = " + retrieved + "\n");
      std::fputs(report.p, stdout);
    } else if (gradcheck->parsed()) {
      if (!common.flags.count("d")) common.flags["d"] = "8";
      if (!common.flags.count("l")) common.flags["l"] = "4";
      auto cfg = make_config(common);
      auto ds = load_data(data, true, false);
      CString report;
      double max_rel = 0.0;
      check(hm_gradcheck(ds.get(), cfg.get(), &report.p, &max_rel));
      write_text(out, report.str());
      write_manifest(out, "gradcheck", cfg.get(), ds.get());
      std::printf("max relative error %.3g\n", max_rel);
      if (tolerance >= 0.0 && max_rel > tolerance)
        throw Failure{HM_ERR_NUMERIC, "gradient check exceeded tolerance"};
    } else if (ablate->parsed()) {
      auto cfg = make_config(common);
      auto ds = load_data(data, true, true);
      CString report, tsv;
      check(hm_ablate(ds.get(), cfg.get(), &report.p, &tsv.p));
      write_text(out, report.str());
      write_text(out + ".tsv", tsv.str());
      write_manifest(out, "ablate", cfg.get(), ds.get());
      std::fputs(report.p, stdout);
    }
  } catch (const Failure& f) {
    for (const auto& p : g_outputs) {
      std::error_code ec;
      std::filesystem::remove_all(p, ec);
    }
    std::fprintf(stderr, "hetmatch: %s\n", f.message.c_str());
    return static_cast<int>(f.status);
  }
  return 0;
}
