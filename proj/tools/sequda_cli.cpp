// Copyright 2026 SeqUDA-Rec authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Links only the C API in sequda.h.
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sequda.h"

namespace {

std::string default_workdir() {
  const char* env = std::getenv("SEQUDA_WORKDIR");
  return env && *env ? env : "workdir";
}

int finish(int rc) {
  if (rc != SEQUDA_OK) std::fprintf(stderr, "error: %s\n", sequda_last_error());
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SeqUDA-Rec: GAN-augmented sequential recommendation pipeline"};
  app.require_subcommand(1);

  // ingest
  std::string in_csv, in_out, col_user = "user_id", col_item = "item_id",
              col_ts = "timestamp", col_label = "label";
  auto* ingest = app.add_subcommand("ingest", "CSV interactions -> dataset directory");
  ingest->add_option("csv", in_csv, "input CSV path")->required();
  ingest->add_option("--out", in_out, "output dataset directory")->required();
  ingest->add_option("--user-col", col_user, "user id column name");
  ingest->add_option("--item-col", col_item, "item id column name");
  ingest->add_option("--timestamp-col", col_ts, "timestamp column name");
  ingest->add_option("--label-col", col_label, "click label column name");

  // synth
  std::string sy_out;
  std::uint64_t sy_seed = 42;
  int sy_users = 200, sy_items = 100, sy_blocks = 4, sy_len = 20;
  double sy_noise = 0.1;
  auto* synth = app.add_subcommand("synth", "generate the block-structured synthetic dataset");
  synth->add_option("--out", sy_out, "output dataset directory")->required();
  synth->add_option("--seed", sy_seed, "generator seed");
  synth->add_option("--users", sy_users, "user count");
  synth->add_option("--items", sy_items, "item count");
  synth->add_option("--blocks", sy_blocks, "block count");
  synth->add_option("--seq-len", sy_len, "events per user");
  synth->add_option("--noise", sy_noise, "out-of-block probability");

  // train
  std::string tr_config, tr_workdir = default_workdir(), tr_ablate;
  std::int64_t tr_seed = -1;
  auto* train = app.add_subcommand("train", "train per config; writes a run directory");
  train->add_option("--config", tr_config, "RunConfig JSON path")->required();
  train->add_option("--seed", tr_seed, "seed override");
  train->add_option("--ablate", tr_ablate, "comma list: no_gcl,no_gan,no_graph_fusion");
  train->add_option("--out", tr_workdir, "workdir (default $SEQUDA_WORKDIR or ./workdir)");

  // evaluate
  std::string ev_ckpt, ev_data, ev_out;
  int ev_k = 0;
  auto* evaluate = app.add_subcommand("evaluate", "test-split metrics for a checkpoint");
  evaluate->add_option("checkpoint", ev_ckpt, "checkpoint directory")->required();
  evaluate->add_option("dataset", ev_data, "dataset directory")->required();
  evaluate->add_option("--k", ev_k, "cutoff K (default: checkpoint eval_k)");
  evaluate->add_option("--out", ev_out, "metrics.json output path");

  // augment
  std::string au_ckpt, au_data, au_out;
  auto* augment = app.add_subcommand("augment", "augmentation pass only; writes pool + audit");
  augment->add_option("checkpoint", au_ckpt, "checkpoint directory")->required();
  augment->add_option("dataset", au_data, "dataset directory")->required();
  augment->add_option("--out", au_out, "output directory")->required();

  // recommend
  std::string re_ckpt, re_data, re_user;
  int re_k = 10;
  auto* recommend = app.add_subcommand("recommend", "top-k items for one user");
  recommend->add_option("checkpoint", re_ckpt, "checkpoint directory")->required();
  recommend->add_option("dataset", re_data, "dataset directory")->required();
  recommend->add_option("user", re_user, "external user id")->required();
  recommend->add_option("--k", re_k, "list length");

  // gradcheck
  std::string gc_scale = "toy";
  double gc_tamper = 0.0;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("scale", gc_scale, "toy or small");
  gradcheck->add_option("--tamper", gc_tamper, "perturb one analytic component (test hook)")
      ->group("");

  // report
  std::string rp_workdir = default_workdir();
  auto* report = app.add_subcommand("report", "compare runs in a workdir");
  report->add_option("workdir", rp_workdir, "workdir (default $SEQUDA_WORKDIR or ./workdir)");

  CLI11_PARSE(app, argc, argv);

  if (*ingest)
    return finish(sequda_ingest(in_csv.c_str(), col_user.c_str(), col_item.c_str(),
                                col_ts.c_str(), col_label.c_str(), in_out.c_str()));
  if (*synth)
    return finish(
        sequda_synth(sy_out.c_str(), sy_seed, sy_users, sy_items, sy_blocks, sy_len, sy_noise));
  if (*train) {
    char run_dir[4096] = {0};
    return finish(sequda_train(tr_config.c_str(), tr_workdir.c_str(), tr_seed,
                               tr_ablate.empty() ? nullptr : tr_ablate.c_str(), run_dir,
                               sizeof(run_dir)));
  }
  if (*evaluate)
    return finish(sequda_evaluate(ev_ckpt.c_str(), ev_data.c_str(), ev_k,
                                  ev_out.empty() ? nullptr : ev_out.c_str()));
  if (*augment)
    return finish(sequda_augment(au_ckpt.c_str(), au_data.c_str(), au_out.c_str()));
  if (*recommend) {
    sequda_model* model = nullptr;
    int rc = sequda_model_load(re_ckpt.c_str(), re_data.c_str(), &model);
    if (rc == SEQUDA_OK) {
      std::vector<char> buf(static_cast<std::size_t>(re_k) * 256 + 256);
      rc = sequda_model_recommend(model, re_user.c_str(), re_k, buf.data(), buf.size());
      if (rc == SEQUDA_OK) std::fputs(buf.data(), stdout);
    }
    sequda_model_free(model);
    return finish(rc);
  }
  if (*gradcheck) return finish(sequda_gradcheck(gc_scale.c_str(), gc_tamper));
  if (*report) return finish(sequda_report(rp_workdir.c_str()));
  return 0;
}
