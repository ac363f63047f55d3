#include "scenemap.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "scenemap/errors.hpp"
#include "scenemap/metrics.hpp"
#include "scenemap/pipeline.hpp"
#include "scenemap/ply_io.hpp"
#include "scenemap/spatial_query.hpp"
#include "scenemap/synthetic.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

sm_status to_status(const scenemap::Error& e) {
  switch (e.kind()) {
    case scenemap::ErrorKind::Config: return SM_ERR_CONFIG;
    case scenemap::ErrorKind::Data: return SM_ERR_DATA;
    case scenemap::ErrorKind::Internal: return SM_ERR_INTERNAL;
  }
  return SM_ERR_INTERNAL;
}

template <typename Fn>
sm_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SM_OK;
  } catch (const scenemap::Error& e) {
    g_last_error = e.what();
    return to_status(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SM_ERR_INTERNAL;
  }
}

std::vector<std::string> to_overrides(const char* const* overrides, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    if (overrides && overrides[i]) out.emplace_back(overrides[i]);
  }
  return out;
}

std::set<scenemap::LifeState> parse_states(const char* states) {
  if (!states || !*states) return {scenemap::LifeState::Recent, scenemap::LifeState::Retained};
  std::set<scenemap::LifeState> out;
  std::istringstream is(states);
  std::string token;
  while (std::getline(is, token, ',')) {
    if (!token.empty()) out.insert(scenemap::life_state_from_string(token));
  }
  if (out.empty()) throw scenemap::ConfigError("no valid states in filter");
  return out;
}

std::string distances_json(const scenemap::GlobalMap& map, const scenemap::Registry& registry,
                           const char* states, int pairwise) {
  const auto include = parse_states(states);
  const scenemap::EgoState ego = scenemap::ego_from_map(map);
  json doc;
  doc["ego"] = {{"frame_index", ego.frame_index},
                {"position", {ego.position.x(), ego.position.y(), ego.position.z()}}};
  json list = json::array();
  for (const auto& r : scenemap::distances(ego, registry, include)) {
    list.push_back({{"global_id", r.global_id},
                    {"class", r.class_label},
                    {"state", scenemap::to_string(r.state)},
                    {"distance", r.distance}});
  }
  doc["objects"] = list;
  if (pairwise) {
    json pairs = json::array();
    for (const auto& p : scenemap::object_distances(registry, include)) {
      pairs.push_back({{"a", p.id_a}, {"b", p.id_b}, {"distance", p.distance}});
    }
    doc["pairs"] = pairs;
  }
  return doc.dump(2);
}

}  // namespace

struct sm_pipeline {
  std::unique_ptr<scenemap::Pipeline> impl;
};

extern "C" {

const char* sm_version(void) { return "scenemap 0.1.0"; }

const char* sm_last_error(void) { return g_last_error.c_str(); }

void sm_string_free(char* s) { std::free(s); }

sm_status sm_pipeline_open(const char* config_path, const char* const* overrides, int n_overrides,
                           const char* resume_checkpoint, sm_pipeline** out) {
  return guarded([&] {
    if (!config_path || !out) throw scenemap::ConfigError("null argument");
    scenemap::PipelineConfig cfg =
        scenemap::load_config(config_path, to_overrides(overrides, n_overrides));
    auto handle = std::make_unique<sm_pipeline>();
    if (resume_checkpoint && *resume_checkpoint) {
      handle->impl = std::make_unique<scenemap::Pipeline>(std::move(cfg), resume_checkpoint);
    } else {
      handle->impl = std::make_unique<scenemap::Pipeline>(std::move(cfg));
    }
    *out = handle.release();
  });
}

sm_status sm_pipeline_step(sm_pipeline* p, int* done) {
  return guarded([&] {
    if (!p) throw scenemap::ConfigError("null pipeline");
    const bool more = p->impl->step();
    if (done) *done = more ? 0 : 1;
  });
}

sm_status sm_pipeline_run(sm_pipeline* p) {
  return guarded([&] {
    if (!p) throw scenemap::ConfigError("null pipeline");
    p->impl->run();
  });
}

sm_status sm_pipeline_finalize(sm_pipeline* p) {
  return guarded([&] {
    if (!p) throw scenemap::ConfigError("null pipeline");
    p->impl->finalize();
  });
}

sm_status sm_pipeline_distances(sm_pipeline* p, const char* states, int pairwise,
                                char** json_out) {
  return guarded([&] {
    if (!p || !json_out) throw scenemap::ConfigError("null argument");
    *json_out = dup_string(distances_json(p->impl->map(), p->impl->registry(), states, pairwise));
  });
}

void sm_pipeline_close(sm_pipeline* p) { delete p; }

sm_status sm_synth_generate(const char* scene_spec_path, const char* out_dir,
                            char** summary_json) {
  return guarded([&] {
    if (!scene_spec_path || !out_dir) throw scenemap::ConfigError("null argument");
    const scenemap::SceneSpec spec = scenemap::SceneSpec::from_file(scene_spec_path);
    const scenemap::SynthOutputs outputs = scenemap::synth_generate(spec, out_dir);
    if (summary_json) {
      json doc;
      doc["manifest"] = outputs.manifest_path;
      doc["gt_trajectory"] = outputs.gt_trajectory_path;
      doc["gt_inventory"] = outputs.gt_inventory_path;
      doc["run_config"] = outputs.run_config_path;
      doc["frames"] = outputs.frame_count;
      doc["blocks"] = outputs.block_count;
      *summary_json = dup_string(doc.dump(2));
    }
  });
}

sm_status sm_eval_ate(const char* est_path, const char* gt_path, double max_dt, int with_scale,
                      char** json_out) {
  return guarded([&] {
    if (!est_path || !gt_path || !json_out) throw scenemap::ConfigError("null argument");
    const scenemap::Trajectory est = scenemap::read_tum(est_path);
    const scenemap::Trajectory gt = scenemap::read_tum(gt_path);
    const auto matches = scenemap::associate(est, gt, max_dt);
    json doc;
    doc["n_matched"] = matches.size();
    doc["ate_rmse_rigid"] = scenemap::ate_rmse(est, gt, max_dt, false);
    doc["ate_rmse_scaled"] = scenemap::ate_rmse(est, gt, max_dt, true);
    doc["ate_rmse"] = with_scale ? doc["ate_rmse_scaled"] : doc["ate_rmse_rigid"];
    doc["alignment"] = with_scale ? "similarity" : "rigid";
    *json_out = dup_string(doc.dump(2));
  });
}

sm_status sm_eval_recon(const char* pred_path, const char* gt_path, int align, int use_median,
                        char** json_out) {
  return guarded([&] {
    if (!pred_path || !gt_path || !json_out) throw scenemap::ConfigError("null argument");
    const auto pred = scenemap::ply_positions(scenemap::read_ply(pred_path));
    const auto gt = scenemap::ply_positions(scenemap::read_ply(gt_path));
    const scenemap::ReconMetrics metrics =
        scenemap::recon_metrics(pred, gt, align != 0, use_median != 0);
    json doc;
    doc["accuracy"] = metrics.accuracy;
    doc["completion"] = metrics.completion;
    doc["chamfer"] = metrics.chamfer;
    doc["n_pred"] = pred.size();
    doc["n_gt"] = gt.size();
    doc["aligned"] = align != 0;
    doc["aggregation"] = use_median ? "median" : "mean";
    *json_out = dup_string(doc.dump(2));
  });
}

sm_status sm_checkpoint_inspect(const char* checkpoint_path, char** json_out) {
  return guarded([&] {
    if (!checkpoint_path || !json_out) throw scenemap::ConfigError("null argument");
    const scenemap::CheckpointSummary s = scenemap::inspect_checkpoint(checkpoint_path);
    json doc;
    doc["config_hash"] = s.config_hash;
    doc["next_block_index"] = s.next_block_index;
    doc["next_frame_index"] = s.next_frame_index;
    doc["trajectory_size"] = s.trajectory_size;
    doc["map_points"] = s.map_points;
    doc["objects"] = s.object_count;
    doc["events"] = s.event_count;
    *json_out = dup_string(doc.dump(2));
  });
}

sm_status sm_export(const char* checkpoint_path, const char* what, const char* out_path) {
  return guarded([&] {
    if (!checkpoint_path || !what || !out_path) throw scenemap::ConfigError("null argument");
    const scenemap::PipelineState state = scenemap::load_checkpoint(checkpoint_path);
    const std::string kind(what);
    if (kind == "map") {
      scenemap::write_ply(out_path,
                          scenemap::map_to_ply_vertices(state.map, state.tracker.registry));
    } else if (kind == "objects") {
      std::ofstream os(out_path);
      if (!os) throw scenemap::DataError(std::string("cannot write ") + out_path);
      os << scenemap::registry_to_json(state.tracker.registry) << '\n';
    } else if (kind == "events") {
      std::vector<scenemap::ChangeEvent> sorted = state.events;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const scenemap::ChangeEvent& a, const scenemap::ChangeEvent& b) {
                         return a.frame_index < b.frame_index;
                       });
      std::ofstream os(out_path);
      if (!os) throw scenemap::DataError(std::string("cannot write ") + out_path);
      os << scenemap::events_to_jsonl(sorted);
    } else {
      throw scenemap::ConfigError("export target must be map, objects or events");
    }
  });
}

sm_status sm_query_distances(const char* checkpoint_path, const char* states, int pairwise,
                             char** json_out) {
  return guarded([&] {
    if (!checkpoint_path || !json_out) throw scenemap::ConfigError("null argument");
    const scenemap::PipelineState state = scenemap::load_checkpoint(checkpoint_path);
    *json_out =
        dup_string(distances_json(state.map, state.tracker.registry, states, pairwise));
  });
}

}  // extern "C"
