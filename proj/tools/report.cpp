#include "report.hpp"

#include "odx/errors.hpp"

namespace odx::report {

Json attack_config(const AttackConfig& cfg) {
  Json j;
  j["distance"] = distance_name(cfg.distance);
  j["k"] = cfg.k;
  j["omega"] = cfg.omega;
  j["lr"] = cfg.eta;
  j["iters"] = cfg.max_iters;
  j["clip"] = clipping_name(cfg.clipping);
  j["seed"] = cfg.seed;
  j["record_stride"] = cfg.record_stride;
  j["adam"] = {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"epsilon", cfg.adam.epsilon}};
  return j;
}

AttackConfig attack_config_from(const Json& j, AttackConfig base) {
  if (!j.is_object()) throw ConfigurationError("attack config must be a JSON object");
  bool omega_given = false;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "distance") {
        base.distance = parse_distance(value.get<std::string>());
      } else if (key == "k") {
        base.k = value.get<int>();
      } else if (key == "omega") {
        base.omega = value.get<std::vector<double>>();
        omega_given = true;
      } else if (key == "lr") {
        base.eta = value.get<double>();
      } else if (key == "iters") {
        base.max_iters = value.get<std::size_t>();
      } else if (key == "clip") {
        base.clipping = parse_clipping(value.get<std::string>());
      } else if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else if (key == "record_stride") {
        base.record_stride = value.get<std::size_t>();
      } else if (key == "adam") {
        for (const auto& [ak, av] : value.items()) {
          if (ak == "beta1") {
            base.adam.beta1 = av.get<double>();
          } else if (ak == "beta2") {
            base.adam.beta2 = av.get<double>();
          } else if (ak == "epsilon") {
            base.adam.epsilon = av.get<double>();
          } else {
            throw ConfigurationError("unknown key 'adam." + ak + "' in attack config");
          }
        }
      } else {
        throw ConfigurationError("unknown key '" + key + "' in attack config");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigurationError(std::string("attack config: ") + e.what());
  }
  if (!omega_given && base.k >= 0) base.omega.assign(static_cast<std::size_t>(base.k), 1.0);
  base.validate();
  return base;
}

Json attack_result(const AttackResult& r) {
  Json j;
  j["best_loss"] = r.best_loss;
  j["distance"] = r.distance_value;
  j["penalty"] = r.penalty_value;
  j["best_iteration"] = r.best_iteration;
  j["iterations"] = r.iterations_run;
  j["class"] = r.y ? Json(*r.y) : Json(nullptr);
  Json traj = Json::array();
  for (const auto& [it, loss] : r.trajectory) traj.push_back({it, loss});
  j["trajectory"] = std::move(traj);
  return j;
}

Json test_report(const TestReport& r) {
  Json j;
  j["test"] = gof_test_name(r.test);
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["n"] = r.n;
  if (r.decision) {
    j["alpha"] = r.decision->alpha;
    j["accepted"] = r.decision->accepted;
  }
  return j;
}

Json train_config(const TrainConfig& cfg) {
  Json j;
  j["iters"] = cfg.iterations;
  j["batch"] = cfg.batch_size;
  j["lr_g"] = cfg.lr_g;
  j["lr_d"] = cfg.lr_d;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["latent_dim"] = cfg.latent_dim;
  j["hidden"] = cfg.hidden;
  j["prior"] = cfg.prior.name();
  j["seed"] = cfg.seed;
  j["classes"] = cfg.class_count ? Json(*cfg.class_count) : Json(nullptr);
  j["log_every"] = cfg.log_every;
  j["ema_decay"] = cfg.ema_decay;
  return j;
}

Json train_log(std::span<const TrainLogEntry> log) {
  Json arr = Json::array();
  for (const auto& e : log) {
    Json row;
    row["iteration"] = e.iteration;
    row["L_D"] = e.loss_d;
    row["L_G"] = e.loss_g;
    if (e.l_source) row["L_source"] = *e.l_source;
    if (e.l_class) row["L_class"] = *e.l_class;
    arr.push_back(std::move(row));
  }
  return arr;
}

Json eval_row(const EvalRow& row) {
  Json j;
  j["dataset"] = row.dataset;
  j["latent_dim"] = row.latent_dim;
  j["prior"] = PriorSpec(row.prior).name();
  j["attacks"] = row.attacks;
  j["avg_mse"] = row.avg_mse;
  j["test_success"] = row.test_success;
  j["avg_mse_relaxed"] = row.avg_mse_relaxed;
  j["test_success_relaxed"] = row.test_success_relaxed;
  if (!row.per_class.empty()) {
    Json pc = Json::array();
    for (const auto& c : row.per_class) {
      pc.push_back({{"class", c.cls},
                    {"attacks", c.attacks},
                    {"avg_mse", c.avg_mse},
                    {"test_success", c.test_success},
                    {"avg_mse_relaxed", c.avg_mse_relaxed},
                    {"test_success_relaxed", c.test_success_relaxed}});
    }
    j["per_class"] = std::move(pc);
  }
  return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace odx::report
