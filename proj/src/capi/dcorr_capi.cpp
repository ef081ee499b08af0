#include "dcorr/dcorr.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include <json.hpp>

#include "dcorr/core/error.hpp"
#include "dcorr/core/flow_io.hpp"
#include "dcorr/core/log.hpp"
#include "dcorr/datapipe/image_io.hpp"
#include "dcorr/evaluation/runners.hpp"
#include "dcorr/evaluation/visualize.hpp"
#include "dcorr/training/trainer.hpp"

struct dcorr_model {
  std::unique_ptr<dcorr::CorrespondenceModel> impl;
};

struct dcorr_flow {
  dcorr::FlowField field;  // [1,2,H,W] float32, contiguous
};

namespace {

using nlohmann::json;

thread_local std::string g_last_error;
thread_local dcorr_error_detail g_last_detail = DCORR_DETAIL_NONE;

dcorr_status status_of(dcorr::ErrorKind kind) {
  switch (kind) {
    case dcorr::ErrorKind::Argument: return DCORR_ERR_ARGUMENT;
    case dcorr::ErrorKind::Data: return DCORR_ERR_DATA;
    case dcorr::ErrorKind::Format: return DCORR_ERR_FORMAT;
    case dcorr::ErrorKind::Configuration: return DCORR_ERR_CONFIGURATION;
    case dcorr::ErrorKind::Computation: return DCORR_ERR_COMPUTATION;
    case dcorr::ErrorKind::Invariant: return DCORR_ERR_INVARIANT;
    case dcorr::ErrorKind::Training: return DCORR_ERR_TRAINING;
  }
  return DCORR_ERR_INTERNAL;
}

template <typename Fn>
dcorr_status guarded(Fn&& fn) {
  g_last_error.clear();
  g_last_detail = DCORR_DETAIL_NONE;
  try {
    fn();
    return DCORR_OK;
  } catch (const dcorr::DegenerateMotionError& e) {
    g_last_error = e.what();
    g_last_detail = DCORR_DETAIL_DEGENERATE_MOTION;
    return DCORR_ERR_DATA;
  } catch (const dcorr::RankError& e) {
    g_last_error = e.what();
    g_last_detail = DCORR_DETAIL_RANK;
    return DCORR_ERR_DATA;
  } catch (const dcorr::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DCORR_ERR_DATA;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DCORR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return DCORR_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw dcorr::ArgumentError(what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const json& j, char** out) { *out = dup_string(j.dump(2)); }

dcorr::PipelineConfig resolve_config(const char* path, const char* overrides) {
  require(path != nullptr, "config path is required");
  std::ifstream in(path);
  if (!in) throw dcorr::ConfigurationError(std::string("config file not found: ") + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw dcorr::ConfigurationError(std::string("config file ") + path + " is not valid JSON: " + e.what());
  }
  if (overrides && *overrides) {
    try {
      j.merge_patch(json::parse(overrides));
    } catch (const json::exception& e) {
      throw dcorr::ArgumentError(std::string("overrides are not valid JSON: ") + e.what());
    }
  }
  return dcorr::config_from_json(j, std::filesystem::absolute(path).parent_path());
}

dcorr_flow* wrap_flow(dcorr::FlowField f) {
  auto data = f.data.dim() == 3 ? f.data.unsqueeze(0) : f.data;
  return new dcorr_flow{dcorr::FlowField{data.detach().to(torch::kFloat32).contiguous(), dcorr::FlowResolution::Full}};
}

}  // namespace

extern "C" {

const char* dcorr_version(void) { return "0.1.0"; }

const char* dcorr_status_string(dcorr_status status) {
  switch (status) {
    case DCORR_OK: return "ok";
    case DCORR_ERR_ARGUMENT: return "argument error";
    case DCORR_ERR_DATA: return "data error";
    case DCORR_ERR_FORMAT: return "format error";
    case DCORR_ERR_CONFIGURATION: return "configuration error";
    case DCORR_ERR_COMPUTATION: return "computation error";
    case DCORR_ERR_INVARIANT: return "invariant violation";
    case DCORR_ERR_TRAINING: return "training error";
    case DCORR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* dcorr_last_error(void) { return g_last_error.c_str(); }
dcorr_error_detail dcorr_last_error_detail(void) { return g_last_detail; }
void dcorr_string_free(char* s) { std::free(s); }

void dcorr_set_log_level(int level) {
  dcorr::set_log_level(static_cast<dcorr::LogLevel>(std::clamp(level, 0, 4)));
}

dcorr_status dcorr_config_resolve(const char* config_path, const char* overrides_json, char** result_json) {
  return guarded([&] {
    require(result_json != nullptr, "result_json must not be NULL");
    const auto c = resolve_config(config_path, overrides_json);
    emit({{"config", dcorr::config_to_json(c)}, {"config_hash", dcorr::config_hash(c)}}, result_json);
  });
}

dcorr_status dcorr_train(const char* config_path, const char* overrides_json, const char* resume_path,
                         const char* out_dir, char** result_json) {
  return guarded([&] {
    require(out_dir != nullptr && *out_dir, "out_dir is required");
    const auto config = resolve_config(config_path, overrides_json);
    auto source = dcorr::make_pair_source(config);
    dcorr::FitOptions opts;
    opts.out_dir = out_dir;
    if (resume_path && *resume_path) opts.resume = std::filesystem::path(resume_path);
    auto result = dcorr::fit(config, *source, opts);
    if (result_json) {
      json ckpts = json::array();
      for (const auto& p : result.checkpoints) ckpts.push_back(p.string());
      json summary = {{"final_step", result.final_step},
                      {"steps_run", result.history.size()},
                      {"config_hash", dcorr::config_hash(config)},
                      {"checkpoints", ckpts}};
      if (!result.history.empty()) {
        const auto& last = result.history.back();
        summary["last"] = {{"L", last.loss}, {"L_p", last.photometric}, {"L_f", last.feature_metric},
                           {"L_d", last.distance}, {"lr", last.learning_rate}};
      }
      emit(summary, result_json);
    }
  });
}

dcorr_status dcorr_model_from_config(const char* config_path, const char* overrides_json, dcorr_model** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    *out = nullptr;
    auto m = std::make_unique<dcorr_model>();
    m->impl = std::make_unique<dcorr::CorrespondenceModel>(resolve_config(config_path, overrides_json));
    *out = m.release();
  });
}

dcorr_status dcorr_model_load(const char* checkpoint_path, dcorr_model** out) {
  return guarded([&] {
    require(out != nullptr && checkpoint_path != nullptr, "checkpoint path and out are required");
    *out = nullptr;
    auto m = std::make_unique<dcorr_model>();
    m->impl = dcorr::load_model(checkpoint_path);
    *out = m.release();
  });
}

void dcorr_model_free(dcorr_model* model) { delete model; }

dcorr_status dcorr_model_info(const dcorr_model* model, char** info_json) {
  return guarded([&] {
    require(model != nullptr && info_json != nullptr, "model and info_json are required");
    const auto& c = model->impl->config();
    emit({{"config_hash", dcorr::config_hash(c)},
          {"parameters", dcorr::parameter_count(*model->impl->encoder())},
          {"config", dcorr::config_to_json(c)}},
         info_json);
  });
}

dcorr_status dcorr_flow_create(int64_t height, int64_t width, const float* data, dcorr_flow** out) {
  return guarded([&] {
    require(out != nullptr && data != nullptr, "data and out are required");
    require(height > 0 && width > 0, "flow size must be positive");
    auto t = torch::from_blob(const_cast<float*>(data), {1, 2, height, width}, torch::kFloat32).clone();
    *out = wrap_flow(dcorr::FlowField{t, dcorr::FlowResolution::Full});
  });
}

dcorr_status dcorr_flow_read(const char* path, dcorr_flow** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "path and out are required");
    *out = wrap_flow(dcorr::read_flow(path));
  });
}

dcorr_status dcorr_flow_write(const dcorr_flow* flow, const char* path) {
  return guarded([&] {
    require(flow != nullptr && path != nullptr, "flow and path are required");
    dcorr::write_flow(flow->field, path);
  });
}

dcorr_status dcorr_flow_shape(const dcorr_flow* flow, int64_t* height, int64_t* width) {
  return guarded([&] {
    require(flow != nullptr, "flow is required");
    if (height) *height = flow->field.height();
    if (width) *width = flow->field.width();
  });
}

dcorr_status dcorr_flow_data(const dcorr_flow* flow, const float** data) {
  return guarded([&] {
    require(flow != nullptr && data != nullptr, "flow and data are required");
    *data = flow->field.data.data_ptr<float>();
  });
}

void dcorr_flow_free(dcorr_flow* flow) { delete flow; }

dcorr_status dcorr_infer_flow(dcorr_model* model, const float* source, const float* target, int64_t height,
                              int64_t width, dcorr_flow** out) {
  return guarded([&] {
    require(model != nullptr && source != nullptr && target != nullptr && out != nullptr,
            "model, images and out are required");
    require(height > 0 && width > 0, "image size must be positive");
    auto s = torch::from_blob(const_cast<float*>(source), {3, height, width}, torch::kFloat32).clone();
    auto t = torch::from_blob(const_cast<float*>(target), {3, height, width}, torch::kFloat32).clone();
    *out = wrap_flow(dcorr::infer_flow_native(*model->impl, s, t));
  });
}

dcorr_status dcorr_infer_flow_files(dcorr_model* model, const char* source_path, const char* target_path,
                                    dcorr_flow** out) {
  return guarded([&] {
    require(model != nullptr && source_path != nullptr && target_path != nullptr && out != nullptr,
            "model, image paths and out are required");
    auto s = dcorr::load_image(source_path);
    auto t = dcorr::load_image(target_path);
    if (s.sizes() != t.sizes()) throw dcorr::DataError("source and target images differ in size");
    *out = wrap_flow(dcorr::infer_flow_native(*model->impl, s, t));
  });
}

dcorr_status dcorr_eval_tapvid(dcorr_model* model, const char* data_dir, const char* flows_dir, int exclude_occluded,
                               char** report_json) {
  return guarded([&] {
    require(data_dir != nullptr && report_json != nullptr, "data_dir and report_json are required");
    const bool have_flows = flows_dir != nullptr && *flows_dir;
    require((model != nullptr) != have_flows, "exactly one of model and flows_dir is required");
    dcorr::TapVidRunOptions opts;
    opts.data = data_dir;
    if (have_flows) opts.flows = std::filesystem::path(flows_dir);
    opts.metrics.exclude_occluded = exclude_occluded != 0;
    const auto run = dcorr::run_tapvid(model ? model->impl.get() : nullptr, opts);
    auto j = dcorr::to_json(run.report);
    j["videos"] = run.videos;
    j["flows_evaluated"] = run.flows_evaluated;
    j["occluded_points_counted_as"] = opts.metrics.exclude_occluded ? "excluded" : "false_positive";
    emit(j, report_json);
  });
}

dcorr_status dcorr_eval_articulation(dcorr_model* model, const char* data_dir, const char* filter_path,
                                     char** report_json) {
  return guarded([&] {
    require(model != nullptr && data_dir != nullptr && report_json != nullptr,
            "model, data_dir and report_json are required");
    dcorr::ArticulationRunOptions opts;
    opts.data = data_dir;
    if (filter_path && *filter_path) opts.filter = std::filesystem::path(filter_path);
    emit(dcorr::run_articulation(*model->impl, opts), report_json);
  });
}

dcorr_status dcorr_fit_revolute(const double* source, const double* target, size_t n, double axis[3],
                                double pivot[3], double* state_deg) {
  return guarded([&] {
    require(source != nullptr && target != nullptr && axis != nullptr && pivot != nullptr && state_deg != nullptr,
            "all pointers are required");
    std::vector<dcorr::Point3D> s, t;
    for (size_t i = 0; i < n; ++i) {
      s.emplace_back(source[3 * i], source[3 * i + 1], source[3 * i + 2]);
      t.emplace_back(target[3 * i], target[3 * i + 1], target[3 * i + 2]);
    }
    const auto p = dcorr::fit_revolute_joint(s, t);
    for (int k = 0; k < 3; ++k) {
      axis[k] = p.axis[k];
      pivot[k] = p.pivot[k];
    }
    *state_deg = p.state_deg;
  });
}

dcorr_status dcorr_plan_action(dcorr_model* model, const char* current_dir, const char* goal_image,
                               double done_threshold_px, char** action_json) {
  return guarded([&] {
    require(model != nullptr && current_dir != nullptr && goal_image != nullptr && action_json != nullptr,
            "model, current_dir, goal_image and action_json are required");
    dcorr::PlanOptions opts;
    if (done_threshold_px > 0) opts.done_threshold_px = done_threshold_px;
    const auto current = dcorr::load_rgbd(current_dir);
    const auto goal = dcorr::load_image(goal_image);
    emit(dcorr::to_json(dcorr::run_plan_action(*model->impl, current, goal, opts)), action_json);
  });
}

dcorr_status dcorr_viz_overlay(const dcorr_flow* flow, const char* source_path, const char* target_path,
                               int64_t spacing, const char* out_png) {
  return guarded([&] {
    require(flow != nullptr && source_path != nullptr && target_path != nullptr && out_png != nullptr,
            "flow, image paths and out_png are required");
    auto s = dcorr::load_image(source_path);
    auto t = dcorr::load_image(target_path);
    if (s.sizes() != t.sizes()) throw dcorr::DataError("source and target images differ in size");
    if (s.size(1) != flow->field.height() || s.size(2) != flow->field.width()) {
      throw dcorr::DataError("flow size differs from the image size");
    }
    dcorr::save_image(dcorr::correspondence_overlay(s, t, flow->field, spacing > 0 ? spacing : 16), out_png);
  });
}

dcorr_status dcorr_viz_pca(dcorr_model* model, const char* source_path, const char* target_path,
                           const char* out_png) {
  return guarded([&] {
    require(model != nullptr && source_path != nullptr && target_path != nullptr && out_png != nullptr,
            "model, image paths and out_png are required");
    auto s = dcorr::load_image(source_path);
    auto t = dcorr::load_image(target_path);
    if (s.sizes() != t.sizes()) throw dcorr::DataError("source and target images differ in size");
    const auto [h, w] = dcorr::resized_shape(s.size(1), s.size(2), std::min(s.size(1), s.size(2)), dcorr::kFeatureStride);
    auto rs = dcorr::resize_image(s, h, w), rt = dcorr::resize_image(t, h, w);
    torch::NoGradGuard no_grad;
    auto& enc = model->impl->encoder();
    enc->eval();
    auto [f1, f2] = dcorr::encode_pair(enc, rs.unsqueeze(0), rt.unsqueeze(0));
    dcorr::save_image(dcorr::pca_overlay(rs, rt, f1, f2), out_png);
  });
}

}  // extern "C"
