// scenemap command line: streaming semantic mapping over precomputed or
// synthetic model outputs. Talks to the engine exclusively through the C API.
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scenemap.h"

namespace {

int status_to_exit(sm_status status) {
  if (status != SM_OK) std::fprintf(stderr, "error: %s\n", sm_last_error());
  return static_cast<int>(status);
}

void print_and_free(char* json) {
  if (!json) return;
  std::printf("%s\n", json);
  sm_string_free(json);
}

std::vector<const char*> to_argv(const std::vector<std::string>& overrides) {
  std::vector<const char*> out;
  out.reserve(overrides.size());
  for (const std::string& o : overrides) out.push_back(o.c_str());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenemap - streaming 3D semantic mapping engine"};
  app.require_subcommand(1);

  // run
  std::string run_config;
  std::vector<std::string> run_overrides;
  std::string run_resume;
  auto* run = app.add_subcommand("run", "process a stream end to end");
  run->add_option("config", run_config, "pipeline config JSON")->required();
  run->add_option("--set", run_overrides, "override, e.g. align.block_size=12");
  run->add_option("--resume", run_resume, "resume from a checkpoint file");

  // synth
  std::string synth_spec, synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic stream");
  synth->add_option("spec", synth_spec, "scene spec JSON")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // eval
  std::string eval_mode, eval_a, eval_b;
  double eval_max_dt = 0.02;
  bool eval_with_scale = false;
  bool eval_align = false;
  bool eval_median = false;
  auto* eval = app.add_subcommand("eval", "trajectory or reconstruction metrics");
  eval->add_option("mode", eval_mode, "ate | recon")->required();
  eval->add_option("estimate", eval_a, "estimated trajectory (TUM) or cloud (PLY)")->required();
  eval->add_option("reference", eval_b, "ground-truth trajectory (TUM) or cloud (PLY)")
      ->required();
  eval->add_option("--max-dt", eval_max_dt, "association window in seconds");
  eval->add_flag("--with-scale", eval_with_scale, "similarity instead of rigid alignment");
  eval->add_flag("--align", eval_align, "pre-align clouds before recon metrics");
  eval->add_flag("--median", eval_median, "median aggregation for recon metrics");

  // export
  std::string export_ckpt, export_what, export_path;
  auto* exp = app.add_subcommand("export", "export map/objects/events from a checkpoint");
  exp->add_option("checkpoint", export_ckpt, "checkpoint file")->required();
  exp->add_option("what", export_what, "map | objects | events")->required();
  exp->add_option("path", export_path, "output file")->required();

  // inspect
  std::string inspect_ckpt;
  auto* inspect = app.add_subcommand("inspect", "print a checkpoint summary");
  inspect->add_option("checkpoint", inspect_ckpt, "checkpoint file")->required();

  // query
  std::string query_ckpt, query_states;
  bool query_pairwise = false;
  auto* query = app.add_subcommand("query", "ego-to-object distances from a checkpoint");
  query->add_option("checkpoint", query_ckpt, "checkpoint file")->required();
  query->add_option("--states", query_states, "comma list: recent,retained,removed");
  query->add_flag("--pairwise", query_pairwise, "include object-to-object distances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (run->parsed()) {
    const auto overrides = to_argv(run_overrides);
    sm_pipeline* pipeline = nullptr;
    sm_status status = sm_pipeline_open(run_config.c_str(), overrides.data(),
                                        static_cast<int>(overrides.size()),
                                        run_resume.empty() ? nullptr : run_resume.c_str(),
                                        &pipeline);
    if (status != SM_OK) return status_to_exit(status);
    status = sm_pipeline_run(pipeline);
    sm_pipeline_close(pipeline);
    return status_to_exit(status);
  }

  if (synth->parsed()) {
    char* summary = nullptr;
    const sm_status status =
        sm_synth_generate(synth_spec.c_str(), synth_out.c_str(), &summary);
    if (status == SM_OK) print_and_free(summary);
    return status_to_exit(status);
  }

  if (eval->parsed()) {
    char* json = nullptr;
    sm_status status;
    if (eval_mode == "ate") {
      status = sm_eval_ate(eval_a.c_str(), eval_b.c_str(), eval_max_dt, eval_with_scale ? 1 : 0,
                           &json);
    } else if (eval_mode == "recon") {
      status = sm_eval_recon(eval_a.c_str(), eval_b.c_str(), eval_align ? 1 : 0,
                             eval_median ? 1 : 0, &json);
    } else {
      std::fprintf(stderr, "error: eval mode must be 'ate' or 'recon'\n");
      return 1;
    }
    if (status == SM_OK) print_and_free(json);
    return status_to_exit(status);
  }

  if (exp->parsed()) {
    return status_to_exit(
        sm_export(export_ckpt.c_str(), export_what.c_str(), export_path.c_str()));
  }

  if (inspect->parsed()) {
    char* json = nullptr;
    const sm_status status = sm_checkpoint_inspect(inspect_ckpt.c_str(), &json);
    if (status == SM_OK) print_and_free(json);
    return status_to_exit(status);
  }

  if (query->parsed()) {
    char* json = nullptr;
    const sm_status status =
        sm_query_distances(query_ckpt.c_str(), query_states.empty() ? nullptr : query_states.c_str(),
                           query_pairwise ? 1 : 0, &json);
    if (status == SM_OK) print_and_free(json);
    return status_to_exit(status);
  }

  return 0;
}
