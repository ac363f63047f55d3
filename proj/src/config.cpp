#include "scenemap/config.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "scenemap/errors.hpp"

namespace scenemap {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

void PipelineConfig::validate() const {
  if (provider != "file" && provider != "synthetic") {
    throw ConfigError("config: provider must be 'file' or 'synthetic'");
  }
  if (provider == "synthetic" && scene_spec.empty()) {
    throw ConfigError("config: synthetic provider needs stream.scene_spec");
  }
  if (manifest.empty()) throw ConfigError("config: stream.manifest is required");
  align.validate();
  smoother.validate();
  tracker.validate();
  change.validate();
  if (!(map_voxel_size > 0.0)) throw ConfigError("config: output.map_voxel_size must be positive");
  if (checkpoint_every < 0) throw ConfigError("config: output.checkpoint_every must be >= 0");
}

json PipelineConfig::to_json() const {
  json doc;
  doc["stream"] = {{"manifest", manifest},
                   {"provider", provider},
                   {"scene_spec", scene_spec},
                   {"tracks_dir", tracks_dir}};
  doc["align"] = {{"block_size", align.block_size},
                  {"keyframe_count", align.keyframe_count},
                  {"near_thresh", align.near_thresh},
                  {"far_thresh", align.far_thresh},
                  {"grid_stride", align.grid_stride}};
  if (align.min_pred_conf) doc["align"]["min_pred_conf"] = *align.min_pred_conf;
  doc["smoother"] = {{"k1", smoother.curvature_half_width},
                     {"k2", smoother.smoothing_half_width},
                     {"kernel", smoother.kernel == SmootherConfig::Kernel::Hann ? "hann"
                                                                                : "uniform"},
                     {"enabled", smoothing_enabled}};
  doc["tracker"] = {{"track_conf_thresh", tracker.track_conf_thresh},
                    {"grid_stride", tracker.grid_stride},
                    {"erosion_radius", tracker.erosion_radius},
                    {"bbox_iou_thresh", tracker.bbox_iou_thresh},
                    {"chamfer_thresh", tracker.chamfer_thresh},
                    {"object_voxel_size", tracker.object_voxel_size}};
  doc["change"] = {{"delta", change.delta},
                   {"eta", change.eta},
                   {"tau_vis", change.tau_vis},
                   {"tau_area", change.tau_area}};
  doc["output"] = {{"dir", output_dir},
                   {"map_voxel_size", map_voxel_size},
                   {"checkpoint_every", checkpoint_every}};
  return doc;
}

PipelineConfig PipelineConfig::from_json(const json& doc) {
  PipelineConfig cfg;
  try {
    if (doc.contains("stream")) {
      const json& s = doc["stream"];
      cfg.manifest = s.value("manifest", cfg.manifest);
      cfg.provider = s.value("provider", cfg.provider);
      cfg.scene_spec = s.value("scene_spec", cfg.scene_spec);
      cfg.tracks_dir = s.value("tracks_dir", cfg.tracks_dir);
    }
    if (doc.contains("align")) {
      const json& a = doc["align"];
      cfg.align.block_size = a.value("block_size", cfg.align.block_size);
      cfg.align.keyframe_count = a.value("keyframe_count", cfg.align.keyframe_count);
      cfg.align.near_thresh = a.value("near_thresh", cfg.align.near_thresh);
      cfg.align.far_thresh = a.value("far_thresh", cfg.align.far_thresh);
      cfg.align.grid_stride = a.value("grid_stride", cfg.align.grid_stride);
      if (a.contains("min_pred_conf") && !a["min_pred_conf"].is_null()) {
        cfg.align.min_pred_conf = a["min_pred_conf"].get<double>();
      }
    }
    if (doc.contains("smoother")) {
      const json& s = doc["smoother"];
      cfg.smoother.curvature_half_width = s.value("k1", cfg.smoother.curvature_half_width);
      cfg.smoother.smoothing_half_width = s.value("k2", cfg.smoother.smoothing_half_width);
      const std::string kernel = s.value("kernel", std::string("hann"));
      if (kernel == "hann") cfg.smoother.kernel = SmootherConfig::Kernel::Hann;
      else if (kernel == "uniform") cfg.smoother.kernel = SmootherConfig::Kernel::Uniform;
      else throw ConfigError("config: unknown kernel " + kernel);
      cfg.smoothing_enabled = s.value("enabled", cfg.smoothing_enabled);
    }
    if (doc.contains("tracker")) {
      const json& t = doc["tracker"];
      cfg.tracker.track_conf_thresh = t.value("track_conf_thresh", cfg.tracker.track_conf_thresh);
      cfg.tracker.grid_stride = t.value("grid_stride", cfg.tracker.grid_stride);
      cfg.tracker.erosion_radius = t.value("erosion_radius", cfg.tracker.erosion_radius);
      cfg.tracker.bbox_iou_thresh = t.value("bbox_iou_thresh", cfg.tracker.bbox_iou_thresh);
      cfg.tracker.chamfer_thresh = t.value("chamfer_thresh", cfg.tracker.chamfer_thresh);
      cfg.tracker.object_voxel_size = t.value("object_voxel_size", cfg.tracker.object_voxel_size);
    }
    if (doc.contains("change")) {
      const json& c = doc["change"];
      cfg.change.delta = c.value("delta", cfg.change.delta);
      cfg.change.eta = c.value("eta", cfg.change.eta);
      cfg.change.tau_vis = c.value("tau_vis", cfg.change.tau_vis);
      cfg.change.tau_area = c.value("tau_area", cfg.change.tau_area);
    }
    if (doc.contains("output")) {
      const json& o = doc["output"];
      cfg.output_dir = o.value("dir", cfg.output_dir);
      cfg.map_voxel_size = o.value("map_voxel_size", cfg.map_voxel_size);
      cfg.checkpoint_every = o.value("checkpoint_every", cfg.checkpoint_every);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::uint64_t PipelineConfig::hash() const { return fnv1a64(to_json().dump()); }

namespace {

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return json(text);  // plain string
  }
}

void apply_override(json& doc, const std::string& dotted) {
  const size_t eq = dotted.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like path.to.key=value: " + dotted);
  }
  const std::string path = dotted.substr(0, eq);
  const json value = parse_override_value(dotted.substr(eq + 1));
  json* node = &doc;
  size_t begin = 0;
  while (true) {
    const size_t dot = path.find('.', begin);
    const std::string key = path.substr(begin, dot - begin);
    if (key.empty()) throw ConfigError("bad override path: " + dotted);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

void resolve_paths(PipelineConfig& cfg, const std::string& base_dir) {
  auto resolve = [&](std::string& path) {
    if (path.empty()) return;
    std::filesystem::path p(path);
    if (!p.is_absolute()) path = (std::filesystem::path(base_dir) / p).string();
  };
  resolve(cfg.manifest);
  resolve(cfg.scene_spec);
  resolve(cfg.tracks_dir);
  resolve(cfg.output_dir);
  if (cfg.tracks_dir.empty() && !cfg.manifest.empty()) {
    cfg.tracks_dir =
        (std::filesystem::path(cfg.manifest).parent_path() / "tracks").string();
  }
}

}  // namespace

PipelineConfig config_from_json_text(const std::string& text,
                                     const std::vector<std::string>& overrides,
                                     const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse: ") + e.what());
  }
  for (const std::string& o : overrides) apply_override(doc, o);
  PipelineConfig cfg = PipelineConfig::from_json(doc);
  resolve_paths(cfg, base_dir);
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw MissingFileError(path);
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::string base =
      std::filesystem::path(path).parent_path().empty()
          ? "."
          : std::filesystem::path(path).parent_path().string();
  return config_from_json_text(text, overrides, base);
}

}  // namespace scenemap
