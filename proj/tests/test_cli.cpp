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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hetmatch/hetmatch.h"

namespace fs = std::filesystem;

namespace {

const std::string kBin = HETMATCH_CLI_PATH;
const std::string kSmall =
    " --set synth.ads=80 --set synth.keywords=160 --set synth.items=40";

int run(const std::string& args) {
  const std::string cmd = kBin + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name)
      : dir(fs::temp_directory_path() / ("hetmatch_test_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run("synth-gen --out " + (dir / "data").string() + kSmall) == 0);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string data() const { return " --data " + (dir / "data").string(); }
  std::string path(const std::string& f) const { return (dir / f).string(); }
};

}  // namespace

TEST_CASE("evaluate on perfect retrieved lists reports 100% everywhere") {
  Workspace w("perfect");
  std::ofstream out(w.path("perfect.tsv"));
  for (const auto& line : lines(slurp(w.path("data/eval_task.tsv")))) {
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, '\t');
    if (f[0] == "target") out << f[1] << "\tad_click\t" << f[2] << "\n";
    if (f[0] == "view_target") out << f[2] << "\t" << f[1] << "\t" << f[3] << "\n";
  }
  out.close();
  REQUIRE(run("evaluate" + w.data() + " --retrieved " + w.path("perfect.tsv") + " --out " +
              w.path("report.txt") + " --ks 100,200") == 0);
  std::size_t cells = 0;
  for (const auto& line : lines(slurp(w.path("report.txt.tsv")))) {
    const auto f = split(line, '\t');
    if (f[0] == "section") continue;
    CHECK(f[4] == "1");
    ++cells;
  }
  // Union, three views and the cold-start cohort, at two K values.
  CHECK(cells == 5 * 2);
}

TEST_CASE("train with zero epochs writes the initialization") {
  Workspace w("epochs0");
  const std::string sizes = " --d 8 --l 4";
  REQUIRE(run("train" + w.data() + sizes + " --epochs 0 --checkpoint " + w.path("m.ckpt")) == 0);
  CHECK(fs::exists(w.path("m.ckpt.manifest")));

  hm_config* cfg = nullptr;
  hm_dataset* ds = nullptr;
  hm_model* init = nullptr;
  hm_model* saved = nullptr;
  REQUIRE(hm_config_new(&cfg) == HM_OK);
  REQUIRE(hm_config_set(cfg, "d", "8") == HM_OK);
  REQUIRE(hm_config_set(cfg, "l", "4") == HM_OK);
  const auto d = w.dir / "data";
  REQUIRE(hm_dataset_load((d / "edges.tsv").c_str(), (d / "nodes.tsv").c_str(), nullptr, nullptr, &ds) ==
          HM_OK);
  REQUIRE(hm_model_init(ds, cfg, &init) == HM_OK);
  REQUIRE(hm_model_load(w.path("m.ckpt").c_str(), &saved) == HM_OK);
  size_t diff = 1;
  REQUIRE(hm_model_compare(init, saved, &diff) == HM_OK);
  CHECK(diff == 0);
  hm_model_free(init);
  hm_model_free(saved);
  hm_dataset_free(ds);
  hm_config_free(cfg);
}

TEST_CASE("ablate emits seven variant rows and four K columns per view") {
  Workspace w("ablate");
  REQUIRE(run("ablate" + w.data() + " --set d=8 --set l=4 --epochs 1 --learning_rate 0.003 --out " +
              w.path("ablate.txt")) == 0);
  const auto text = lines(slurp(w.path("ablate.txt")));
  const std::vector<std::string> variants = {"full", "\\s", "\\v", "\\a", "bid", "item", "dssm"};
  std::map<std::string, std::size_t> rows;
  std::string section;
  for (const auto& line : text) {
    if (line.rfind("Recall@", 0) == 0 || line.rfind("Cold-start", 0) == 0) {
      section = line;
      continue;
    }
    if (line.rfind("variant", 0) == 0) {
      std::size_t ks = 0;
      for (std::size_t p = line.find("K="); p != std::string::npos; p = line.find("K=", p + 1)) ++ks;
      CHECK(ks == 4);
      continue;
    }
    for (const auto& v : variants)
      if (line.rfind(v + " ", 0) == 0) ++rows[section];
  }
  for (const char* view : {"ad_click", "ad_bid", "item_click"})
    CHECK(rows["Recall@K (" + std::string(view) + " view)"] == 7);
  CHECK(rows["Recall@3K"] == 7);
  const auto manifest = slurp(w.path("ablate.txt.manifest"));
  CHECK(manifest.find("input.edges") != std::string::npos);
  CHECK(manifest.find("seed = ") != std::string::npos);
}

TEST_CASE("usage errors exit 2 and failures leave no partial outputs") {
  Workspace w("errors");
  CHECK(run("train --no-such-flag") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("train --edges /nonexistent/e.tsv --nodes /nonexistent/n.tsv --labels x --checkpoint " +
            w.path("bad.ckpt")) == 2);
  CHECK_FALSE(fs::exists(w.path("bad.ckpt")));
  CHECK_FALSE(fs::exists(w.path("bad.ckpt.manifest")));

  REQUIRE(run("train" + w.data() + " --d 8 --l 4 --epochs 0 --checkpoint " + w.path("m.ckpt")) == 0);
  CHECK(run("embed" + w.data() + " --set d=16 --checkpoint " + w.path("m.ckpt") + " --out " +
            w.path("emb.tsv")) == 3);
  CHECK_FALSE(fs::exists(w.path("emb.tsv")));

  std::ofstream(w.path("broken_edges.tsv")) << "ad\t1\tad_click_kw\tkeyword\n";
  CHECK(run("build-graph --edges " + w.path("broken_edges.tsv") + " --nodes " +
            w.path("data/nodes.tsv") + " --out " + w.path("summary.txt")) == 3);
  CHECK_FALSE(fs::exists(w.path("summary.txt")));
}

TEST_CASE("identical inputs produce identical artifacts") {
  Workspace w("repeat");
  for (const char* name : {"a.ckpt", "b.ckpt"})
    REQUIRE(run("train" + w.data() + " --d 8 --l 4 --epochs 1 --batch_size 64 --learning_rate 0.003 --checkpoint " +
                w.path(name)) == 0);
  CHECK(slurp(w.path("a.ckpt")) == slurp(w.path("b.ckpt")));
  CHECK(slurp(w.path("a.ckpt.losses")) == slurp(w.path("b.ckpt.losses")));
}
