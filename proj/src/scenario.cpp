#include "tfta/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tfta {

namespace {

using Json = nlohmann::ordered_json;

// Reads the keys of one object, rejecting unknown ones once done.
class Reader {
 public:
  Reader(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(context_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + context_);
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const Json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const Json* v = child(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) throw ConfigError("");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError("");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      throw ConfigError("bad value for '" + key + "' in " + context_);
    }
  }

  void get(const std::string& key, Vec3& out) {
    const Json* v = child(key);
    if (!v) return;
    if (!v->is_array() || v->size() != 3) throw ConfigError("'" + key + "' in " + context_ + " must be [x, y, z]");
    for (int i = 0; i < 3; ++i) {
      if (!(*v)[i].is_number()) throw ConfigError("'" + key + "' in " + context_ + " must hold numbers");
      out[i] = (*v)[i].get<double>();
    }
  }

  const std::string& context() const { return context_; }

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;
};

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

constexpr EnumName<MotionKind> kMotionNames[] = {{MotionKind::kStatic, "static"},
                                                  {MotionKind::kLine, "line"},
                                                  {MotionKind::kCircle, "circle"},
                                                  {MotionKind::kSine, "sine"},
                                                  {MotionKind::kTangent, "tangent"}};
constexpr EnumName<GroundMode> kGroundNames[] = {{GroundMode::kAdditive, "additive"}, {GroundMode::kLiteral, "literal"}};
constexpr EnumName<ObstacleRewardMode> kObstacleNames[] = {{ObstacleRewardMode::kLiteral, "literal"},
                                                           {ObstacleRewardMode::kRepulsive, "repulsive"}};

template <typename E, std::size_t N>
const char* enum_name(const EnumName<E> (&table)[N], E value) {
  for (const auto& e : table)
    if (e.value == value) return e.name;
  return "?";
}

template <typename E, std::size_t N>
void get_enum(Reader& r, const std::string& key, const EnumName<E> (&table)[N], E& out) {
  std::string text;
  if (!r.has(key)) return;
  r.get(key, text);
  for (const auto& e : table)
    if (text == e.name) {
      out = e.value;
      return;
    }
  throw ConfigError("unknown value '" + text + "' for '" + key + "' in " + r.context());
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

// --- readers ---

void read(const Json& j, TerrainSpec& t) {
  Reader r(j, "terrain");
  if (r.has("file")) {
    std::string f;
    r.get("file", f);
    t.file = f;
  }
  r.get("seed", t.seed);
  r.get("cols", t.cols);
  r.get("rows", t.rows);
  r.get("cell", t.cell);
  r.get("relief", t.relief);
  r.get("origin_x", t.origin_x);
  r.get("origin_y", t.origin_y);
}

void read(const Json& j, Threat& t) {
  Reader r(j, "threat");
  r.get("center", t.center0);
  r.get("semi_axes", t.semi_axes);
  if (const Json* e = r.child("exponents")) {
    if (!e->is_array() || e->size() != 3) throw ConfigError("threat exponents must be [d, e, f]");
    for (int i = 0; i < 3; ++i) {
      if (!(*e)[i].is_number_integer()) throw ConfigError("threat exponents must be integers");
      t.exponents[i] = (*e)[i].get<int>();
    }
  }
  if (const Json* m = r.child("motion")) {
    Reader mr(*m, "threat motion");
    get_enum(mr, "kind", kMotionNames, t.motion.kind);
    mr.get("amplitude", t.motion.amplitude);
    mr.get("angular_rate", t.motion.angular_rate);
    mr.get("direction", t.motion.direction);
    mr.get("phase", t.motion.phase);
  }
  r.get("r_obs", t.r_obs);
  r.get("r_threaten", t.r_threaten);
  r.get("lambda", t.lambda);
}

void read(const Json& j, Region& g, const char* name) {
  Reader r(j, name);
  r.get("x", g.x);
  r.get("y", g.y);
  r.get("radius", g.radius);
}

void read(const Json& j, KinematicLimits& l) {
  Reader r(j, "limits");
  r.get("gamma_max_rad", l.gamma_max);
  r.get("roll_max_rad", l.roll_max);
  r.get("gravity", l.gravity);
  r.get("load_factor_max", l.load_factor_max);
}

void read(const Json& j, FieldConfig& f) {
  Reader r(j, "field");
  r.get("cruise_speed", f.cruise_speed);
  r.get("r_conf", f.r_conf);
  r.get("height_safe", f.height_safe);
  r.get("ground_ceiling", f.ground_ceiling);
  get_enum(r, "ground_mode", kGroundNames, f.ground_mode);
}

void read(const Json& j, SensorConfig& s) {
  Reader r(j, "sensor");
  r.get("range", s.range);
  r.get("dropout", s.dropout);
}

void read(const Json& j, RewardConfig& c) {
  Reader r(j, "reward");
  r.get("w_h", c.w_h);
  r.get("w_o", c.w_o);
  r.get("w_p", c.w_p);
  r.get("w_r", c.w_r);
  r.get("chi", c.chi);
  r.get("delta", c.delta);
  r.get("h_down", c.h_down);
  r.get("h_up", c.h_up);
  r.get("alpha_o", c.alpha_o);
  r.get("beta_o", c.beta_o);
  r.get("kappa", c.kappa);
  r.get("phi_w", c.phi_w);
  r.get("phi_good_rad", c.phi_good);
  get_enum(r, "obstacle_mode", kObstacleNames, c.obstacle_mode);
  r.get("sum_over_threats", c.sum_over_threats);
  r.get("failure_as_key_point", c.failure_as_key_point);
}

void read(const Json& j, PlannerConfig& p, const char* name) {
  Reader r(j, name);
  r.get("iter_max", p.iter_max);
  r.get("time_budget_s", p.time_budget_s);
  r.get("step", p.step);
  r.get("goal_radius", p.goal_radius);
  r.get("w_len", p.w_len);
  r.get("w_tf", p.w_tf);
  r.get("h_down", p.h_down);
  r.get("h_up", p.h_up);
  r.get("gamma_rrt", p.gamma_rrt);
  r.get("goal_bias", p.goal_bias);
  r.get("stop_at_first_solution", p.stop_at_first_solution);
  r.get("edge_samples", p.edge_samples);
  r.get("goal_connect_range", p.goal_connect_range);
}

void read(const Json& j, MissionConfig& m) {
  Reader r(j, "mission");
  r.get("dt", m.dt);
  r.get("goal_radius", m.goal_radius);
  r.get("start_agl", m.start_agl);
  r.get("goal_agl", m.goal_agl);
  r.get("max_steps", m.max_steps);
  r.get("key_points", m.key_points);
  r.get("collision_samples", m.collision_samples);
}

void read(const Json& j, PpoConfig& c) {
  Reader r(j, "ppo");
  r.get("clip_epsilon", c.clip_epsilon);
  r.get("discount", c.discount);
  r.get("lr_actor", c.lr_actor);
  r.get("lr_critic", c.lr_critic);
  r.get("batch_size", c.batch_size);
  r.get("minibatch_size", c.minibatch_size);
  r.get("epochs", c.epochs);
  r.get("gae_lambda", c.gae_lambda);
  r.get("momentum", c.momentum);
  r.get("max_grad_norm", c.max_grad_norm);
  r.get("entropy_coef", c.entropy_coef);
  r.get("critic_coef", c.critic_coef);
  r.get("hidden_width", c.hidden_width);
  r.get("hidden_layers", c.hidden_layers);
  r.get("log_std_init", c.log_std_init);
  r.get("log_std_min", c.log_std_min);
  r.get("log_std_max", c.log_std_max);
}

void read(const Json& j, TrainingConfig& t) {
  Reader r(j, "training");
  r.get("episodes", t.episodes);
  r.get("eval_every", t.eval_every);
  r.get("eval_episodes", t.eval_episodes);
  r.get("checkpoint_every", t.checkpoint_every);
  r.get("workers", t.workers);
  r.get("success_target", t.success_target);
}

void read(const Json& j, BenchConfig& b) {
  Reader r(j, "bench");
  r.get("runs", b.runs);
  r.get("ifds_beta", b.ifds_beta);
  if (const Json* p = r.child("rrt")) read(*p, b.rrt, "bench rrt");
}

// --- writers ---

Json write(const TerrainSpec& t) {
  Json j;
  if (t.file) j["file"] = *t.file;
  j["seed"] = t.seed;
  j["cols"] = t.cols;
  j["rows"] = t.rows;
  j["cell"] = t.cell;
  j["relief"] = t.relief;
  j["origin_x"] = t.origin_x;
  j["origin_y"] = t.origin_y;
  return j;
}

Json write(const Threat& t) {
  Json j;
  j["center"] = vec_json(t.center0);
  j["semi_axes"] = vec_json(t.semi_axes);
  j["exponents"] = Json::array({t.exponents[0], t.exponents[1], t.exponents[2]});
  j["motion"] = {{"kind", enum_name(kMotionNames, t.motion.kind)},
                 {"amplitude", t.motion.amplitude},
                 {"angular_rate", t.motion.angular_rate},
                 {"direction", vec_json(t.motion.direction)},
                 {"phase", t.motion.phase}};
  j["r_obs"] = t.r_obs;
  j["r_threaten"] = t.r_threaten;
  j["lambda"] = t.lambda;
  return j;
}

Json write(const Region& g) { return {{"x", g.x}, {"y", g.y}, {"radius", g.radius}}; }

Json write(const KinematicLimits& l) {
  return {{"gamma_max_rad", l.gamma_max},
          {"roll_max_rad", l.roll_max},
          {"gravity", l.gravity},
          {"load_factor_max", l.load_factor_max}};
}

Json write(const FieldConfig& f) {
  return {{"cruise_speed", f.cruise_speed},
          {"r_conf", f.r_conf},
          {"height_safe", f.height_safe},
          {"ground_ceiling", f.ground_ceiling},
          {"ground_mode", enum_name(kGroundNames, f.ground_mode)}};
}

Json write(const SensorConfig& s) { return {{"range", s.range}, {"dropout", s.dropout}}; }

Json write(const RewardConfig& c) {
  return {{"w_h", c.w_h},
          {"w_o", c.w_o},
          {"w_p", c.w_p},
          {"w_r", c.w_r},
          {"chi", c.chi},
          {"delta", c.delta},
          {"h_down", c.h_down},
          {"h_up", c.h_up},
          {"alpha_o", c.alpha_o},
          {"beta_o", c.beta_o},
          {"kappa", c.kappa},
          {"phi_w", c.phi_w},
          {"phi_good_rad", c.phi_good},
          {"obstacle_mode", enum_name(kObstacleNames, c.obstacle_mode)},
          {"sum_over_threats", c.sum_over_threats},
          {"failure_as_key_point", c.failure_as_key_point}};
}

Json write(const PlannerConfig& p) {
  return {{"iter_max", p.iter_max},
          {"time_budget_s", p.time_budget_s},
          {"step", p.step},
          {"goal_radius", p.goal_radius},
          {"w_len", p.w_len},
          {"w_tf", p.w_tf},
          {"h_down", p.h_down},
          {"h_up", p.h_up},
          {"gamma_rrt", p.gamma_rrt},
          {"goal_bias", p.goal_bias},
          {"stop_at_first_solution", p.stop_at_first_solution},
          {"edge_samples", p.edge_samples},
          {"goal_connect_range", p.goal_connect_range}};
}

Json write(const MissionConfig& m) {
  return {{"dt", m.dt},
          {"goal_radius", m.goal_radius},
          {"start_agl", m.start_agl},
          {"goal_agl", m.goal_agl},
          {"max_steps", m.max_steps},
          {"key_points", m.key_points},
          {"collision_samples", m.collision_samples}};
}

Json write(const PpoConfig& c) {
  return {{"clip_epsilon", c.clip_epsilon}, {"discount", c.discount},
          {"lr_actor", c.lr_actor},         {"lr_critic", c.lr_critic},
          {"batch_size", c.batch_size},     {"minibatch_size", c.minibatch_size},
          {"epochs", c.epochs},
          {"gae_lambda", c.gae_lambda},     {"momentum", c.momentum},
          {"max_grad_norm", c.max_grad_norm}, {"entropy_coef", c.entropy_coef},
          {"critic_coef", c.critic_coef},   {"hidden_width", c.hidden_width},
          {"hidden_layers", c.hidden_layers}, {"log_std_init", c.log_std_init},
          {"log_std_min", c.log_std_min},   {"log_std_max", c.log_std_max}};
}

Json write(const TrainingConfig& t) {
  return {{"episodes", t.episodes},
          {"eval_every", t.eval_every},
          {"eval_episodes", t.eval_episodes},
          {"checkpoint_every", t.checkpoint_every},
          {"workers", t.workers},
          {"success_target", t.success_target}};
}

Json write(const BenchConfig& b) { return {{"runs", b.runs}, {"ifds_beta", b.ifds_beta}, {"rrt", write(b.rrt)}}; }

}  // namespace

bool Scenario::operator==(const Scenario& o) const {
  return seed == o.seed && terrain == o.terrain && threats == o.threats && start_region == o.start_region &&
         goal_region == o.goal_region && limits == o.limits && field == o.field && sensor == o.sensor &&
         reward == o.reward && planner == o.planner && mission == o.mission && ppo == o.ppo &&
         training == o.training && bench == o.bench;
}

Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  Scenario s;
  s.base_dir = base_dir;
  {
    Reader r(root, "scenario");
    r.get("seed", s.seed);
    if (const Json* j = r.child("terrain")) read(*j, s.terrain);
    if (const Json* j = r.child("threats")) {
      if (!j->is_array()) throw ConfigError("threats must be a list");
      for (const auto& item : *j) {
        Threat t;
        read(item, t);
        s.threats.push_back(t);
      }
    }
    if (const Json* j = r.child("start")) read(*j, s.start_region, "start");
    if (const Json* j = r.child("goal")) read(*j, s.goal_region, "goal");
    if (const Json* j = r.child("limits")) read(*j, s.limits);
    if (const Json* j = r.child("field")) read(*j, s.field);
    if (const Json* j = r.child("sensor")) read(*j, s.sensor);
    if (const Json* j = r.child("reward")) read(*j, s.reward);
    if (const Json* j = r.child("planner")) read(*j, s.planner, "planner");
    if (const Json* j = r.child("mission")) read(*j, s.mission);
    if (const Json* j = r.child("ppo")) read(*j, s.ppo);
    if (const Json* j = r.child("training")) read(*j, s.training);
    if (const Json* j = r.child("bench")) read(*j, s.bench);
  }
  validate(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

std::string serialize_scenario(const Scenario& s) {
  Json j;
  j["seed"] = s.seed;
  j["terrain"] = write(s.terrain);
  j["threats"] = Json::array();
  for (const auto& t : s.threats) j["threats"].push_back(write(t));
  j["start"] = write(s.start_region);
  j["goal"] = write(s.goal_region);
  j["limits"] = write(s.limits);
  j["field"] = write(s.field);
  j["sensor"] = write(s.sensor);
  j["reward"] = write(s.reward);
  j["planner"] = write(s.planner);
  j["mission"] = write(s.mission);
  j["ppo"] = write(s.ppo);
  j["training"] = write(s.training);
  j["bench"] = write(s.bench);
  return j.dump(2) + "\n";
}

void validate(const Scenario& s) {
  try {
    validate(s.limits);
    validate(s.reward);
    validate(s.ppo);
    for (const auto& t : s.threats) validate(t);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!s.terrain.file && (s.terrain.cols < 2 || s.terrain.rows < 2 || !(s.terrain.cell > 0.0) ||
                          !(s.terrain.relief >= 0.0)))
    throw ConfigError("terrain generator needs cols, rows >= 2, cell > 0 and relief >= 0");
  const auto& t = s.training;
  if (t.episodes < 0 || t.eval_every <= 0 || t.eval_episodes <= 0 || t.checkpoint_every < 0 || t.workers <= 0)
    throw ConfigError("invalid training settings");
  if (s.bench.runs <= 0) throw ConfigError("bench runs must be positive");
  if (!(s.bench.ifds_beta >= FieldAction::kMinGain && s.bench.ifds_beta <= FieldAction::kMaxGain))
    throw ConfigError("bench ifds_beta must lie in the action box");
  for (const PlannerConfig* p : {&s.planner, &s.bench.rrt})
    if (p->iter_max <= 0 || !(p->step > 0.0) || !(p->goal_radius > 0.0) || !(p->h_down < p->h_up) ||
        p->edge_samples < 1 || !(p->goal_connect_range >= 0.0) || !(p->goal_bias >= 0.0 && p->goal_bias < 1.0))
      throw ConfigError("invalid planner settings");
}

Mission build_mission(const Scenario& s) {
  TerrainGrid terrain = [&] {
    if (s.terrain.file) {
      std::filesystem::path p = *s.terrain.file;
      if (p.is_relative()) p = s.base_dir / p;
      if (!std::filesystem::exists(p)) throw ConfigError("terrain file not found: " + p.string());
      return load_dem(p);
    }
    return generate_terrain(s.terrain.seed, s.terrain.cols, s.terrain.rows, s.terrain.cell, s.terrain.relief,
                            s.terrain.origin_x, s.terrain.origin_y);
  }();
  Mission m{std::move(terrain), s.threats, s.start_region, s.goal_region, s.limits, s.field,
            s.sensor,           s.reward,  s.planner,      s.mission};
  try {
    validate(m);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return m;
}

}  // namespace tfta
