#include "comfort/postprocess_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "comfort/errors.hpp"
#include "json.hpp"

namespace comfort {

namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const json& object_at(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  return j;
}

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ParseError(join(path, k), "unknown field");
  }
}

double number(const json& obj, const std::string& path, const char* key, const double* fallback) {
  const std::string here = join(path, key);
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ParseError(here, "missing required field");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ParseError(here, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParseError(here, "expected a finite number");
  return d;
}

double required(const json& obj, const std::string& path, const char* key) {
  return number(obj, path, key, nullptr);
}

double optional(const json& obj, const std::string& path, const char* key, double fallback) {
  return number(obj, path, key, &fallback);
}

std::vector<double> number_array(const json& v, const std::string& path, std::size_t size) {
  if (!v.is_array() || (size && v.size() != size)) {
    throw ParseError(path, size ? "expected an array of " + std::to_string(size) + " numbers"
                                : "expected an array");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ParseError(path + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

Vec2 vec2(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ParseError(join(path, key), "missing required field");
  const auto a = number_array(obj.at(key), join(path, key), 2);
  return {a[0], a[1]};
}

Range range(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ParseError(join(path, key), "missing required field");
  const auto a = number_array(obj.at(key), join(path, key), 2);
  return {a[0], a[1]};
}

const json& member(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ParseError(join(path, key), "missing required field");
  return object_at(j.at(key), join(path, key));
}

BoundaryState parse_state(const json& j, const std::string& path) {
  check_keys(j, path, {"position", "theta", "kappa", "v", "a_T"});
  BoundaryState s;
  s.position = vec2(j, path, "position");
  s.theta = required(j, path, "theta");
  s.kappa = optional(j, path, "kappa", 0.0);
  s.v = required(j, path, "v");
  s.a_T = optional(j, path, "a_T", 0.0);
  return s;
}

StarShapedObstacle parse_obstacle(const json& j, const std::string& path) {
  object_at(j, path);
  if (!j.contains("type") || !j.at("type").is_string()) {
    throw ParseError(join(path, "type"), "expected \"circle\" or \"polar\"");
  }
  const std::string type = j.at("type").get<std::string>();
  if (type == "circle") {
    check_keys(j, path, {"type", "center", "radius"});
    const double r = required(j, path, "radius");
    if (!(r > 0.0)) throw ParseError(join(path, "radius"), "must be positive");
    return StarShapedObstacle::circle(vec2(j, path, "center"), r);
  }
  if (type == "polar") {
    check_keys(j, path, {"type", "center", "knots"});
    const std::string kp = join(path, "knots");
    if (!j.contains("knots") || !j.at("knots").is_array()) throw ParseError(kp, "expected an array");
    std::vector<std::pair<double, double>> knots;
    const json& arr = j.at("knots");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto k = number_array(arr[i], kp + "[" + std::to_string(i) + "]", 2);
      knots.emplace_back(k[0], k[1]);
    }
    try {
      return StarShapedObstacle::polar(vec2(j, path, "center"), std::move(knots));
    } catch (const Error& e) {
      throw ParseError(kp, e.what());
    }
  }
  throw ParseError(join(path, "type"), "expected \"circle\" or \"polar\"");
}

json state_json(const BoundaryState& s) {
  json j = json::object();
  j["position"] = {s.position.x(), s.position.y()};
  j["theta"] = s.theta;
  j["kappa"] = s.kappa;
  j["v"] = s.v;
  j["a_T"] = s.a_T;
  return j;
}

std::string format17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, int line) {
  // strtod handles inf/nan and every %.17g output.
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    throw ParseError("line " + std::to_string(line), "bad number '" + text + "'");
  }
  return v;
}

// Analytic limit of a_T at a zero-speed end: v v' -> v_1^2 / (2 h) for
// p = 1/2 and -> 0 for p = 2/3.
double singular_end_acceleration(const DofVector& dofs, bool left) {
  const auto& lay = dofs.layout();
  const auto& mesh = lay.mesh();
  const double p = left ? mesh.left_exponent : mesh.right_exponent;
  if (p != kExponentNonzeroAccel) return 0.0;
  const int node = left ? 1 : lay.n_elements() - 1;
  const double c = dofs[lay.v(node)];
  const double sign = left ? 1.0 : -1.0;
  return sign * c * c / (2.0 * mesh.element_width * dofs.lambda());
}

}  // namespace

std::vector<TrajectorySample> sample_trajectory(const DofVector& dofs, int count) {
  if (count < 2) throw DomainError("sample_trajectory needs at least two samples");
  const auto& lay = dofs.layout();
  const auto& mesh = lay.mesh();
  const double lambda = dofs.lambda();
  std::vector<TrajectorySample> out(count);
  Vec2 r(dofs[lay.px(0)], dofs[lay.py(0)]);
  double t = 0.0;
  for (int k = 0; k < count; ++k) {
    const double u = k == count - 1 ? 1.0 : static_cast<double>(k) / (count - 1);
    TrajectorySample& s = out[k];
    s.u = u;
    if (k > 0) {
      const double ua = out[k - 1].u;
      r += position_integral(dofs, ua, u);
      t = time_map(dofs, u);
    }
    s.t = t;
    s.x = r.x();
    s.y = r.y();
    const bool left_end = u == 0.0 && mesh.left_singular;
    const bool right_end = u == 1.0 && mesh.right_singular;
    if (left_end || right_end) {
      s.theta = theta_at(dofs, u);
      s.v = 0.0;
      const int e = left_end ? 0 : lay.n_elements() - 1;
      const double dtheta = dofs.apply(lay.theta_stencil(e, left_end ? 0.0 : 1.0), 1);
      s.kappa = dtheta / lambda;
      s.a_T = singular_end_acceleration(dofs, left_end);
      s.a_N = 0.0;
      s.omega = 0.0;
      continue;
    }
    const KinematicSample f = eval_fields(dofs, u);
    if (u > 0.0 && u < 1.0 && !(f.v > 0.0)) {
      throw NonPositiveSpeedError("sample_trajectory: non-positive speed at u = " +
                                  format17(u));
    }
    s.theta = f.theta;
    s.v = f.v;
    s.a_T = f.a_T;
    s.a_N = f.a_N;
    s.kappa = f.kappa;
    s.omega = f.omega;
  }
  return out;
}

ProblemSpec parse_problem(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
  object_at(root, "");
  check_keys(root, "",
             {"format_version", "start", "end", "limits", "weights", "obstacles", "mesh"});
  if (root.contains("format_version")) {
    const json& v = root.at("format_version");
    if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
      throw ParseError("format_version", "unsupported version");
    }
  }

  ProblemSpec spec;
  spec.start = parse_state(member(root, "", "start"), "start");
  spec.end = parse_state(member(root, "", "end"), "end");

  const json& lim = member(root, "", "limits");
  check_keys(lim, "limits", {"v_max", "a_T", "a_N", "omega", "kappa_max"});
  spec.limits.v_max = required(lim, "limits", "v_max");
  spec.limits.a_T = range(lim, "limits", "a_T");
  spec.limits.a_N = range(lim, "limits", "a_N");
  spec.limits.omega = range(lim, "limits", "omega");
  spec.limits.kappa_max = required(lim, "limits", "kappa_max");

  const json& w = member(root, "", "weights");
  check_keys(w, "weights", {"w_T", "w_N"});
  spec.weights.w_T = required(w, "weights", "w_T");
  spec.weights.w_N = required(w, "weights", "w_N");

  if (root.contains("obstacles")) {
    const json& arr = root.at("obstacles");
    if (!arr.is_array()) throw ParseError("obstacles", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      spec.obstacles.obstacles.push_back(
          parse_obstacle(arr[i], "obstacles[" + std::to_string(i) + "]"));
    }
  }
  if (root.contains("mesh")) {
    const json& m = object_at(root.at("mesh"), "mesh");
    check_keys(m, "mesh", {"n", "M"});
    for (const char* key : {"n", "M"}) {
      if (m.contains(key) && !m.at(key).is_number_integer()) {
        throw ParseError(join("mesh", key), "expected an integer");
      }
    }
    spec.n_elements = m.value("n", spec.n_elements);
    spec.points_per_element = m.value("M", spec.points_per_element);
  }
  spec.validate();
  return spec;
}

ProblemSpec read_problem(const std::filesystem::path& path) {
  return parse_problem(read_text(path));
}

std::string problem_to_json(const ProblemSpec& spec) {
  json root = json::object();
  root["format_version"] = kFormatVersion;
  root["start"] = state_json(spec.start);
  root["end"] = state_json(spec.end);
  const auto& l = spec.limits;
  root["limits"] = {{"v_max", l.v_max},
                    {"a_T", {l.a_T.min, l.a_T.max}},
                    {"a_N", {l.a_N.min, l.a_N.max}},
                    {"omega", {l.omega.min, l.omega.max}},
                    {"kappa_max", l.kappa_max}};
  root["weights"] = {{"w_T", spec.weights.w_T}, {"w_N", spec.weights.w_N}};
  json obs = json::array();
  for (const auto& o : spec.obstacles.obstacles) {
    json j = json::object();
    j["center"] = {o.center().x(), o.center().y()};
    if (o.is_circle()) {
      j["type"] = "circle";
      j["radius"] = o.radius();
    } else {
      j["type"] = "polar";
      json knots = json::array();
      for (std::size_t k = 0; k < o.knot_angles().size(); ++k) {
        knots.push_back({o.knot_angles()[k], o.knot_radii()[k]});
      }
      j["knots"] = knots;
    }
    obs.push_back(j);
  }
  root["obstacles"] = obs;
  root["mesh"] = {{"n", spec.n_elements}, {"M", spec.points_per_element}};
  return root.dump(2) + "\n";
}

void write_problem(const std::filesystem::path& path, const ProblemSpec& spec) {
  write_text(path, problem_to_json(spec));
}

std::string result_to_csv(const std::vector<TrajectorySample>& samples, const Metadata& metadata) {
  std::string out = "# format_version " + std::to_string(kFormatVersion) + "\n";
  for (const auto& [k, v] : metadata) out += "# " + k + ": " + v + "\n";
  out += "u,t,x,y,theta,v,a_T,a_N,kappa,omega\n";
  for (const auto& s : samples) {
    const double vals[] = {s.u, s.t, s.x, s.y, s.theta, s.v, s.a_T, s.a_N, s.kappa, s.omega};
    for (int i = 0; i < 10; ++i) {
      if (i) out += ',';
      out += format17(vals[i]);
    }
    out += '\n';
  }
  return out;
}

void write_result(const std::filesystem::path& path, const std::vector<TrajectorySample>& samples,
                  const Metadata& metadata) {
  write_text(path, result_to_csv(samples, metadata));
}

ResultFile parse_result(const std::string& csv_text) {
  ResultFile out;
  std::istringstream in(csv_text);
  std::string line;
  int line_no = 0;
  bool header = false;
  bool version = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# format_version ", 0) == 0) {
        if (std::stoi(line.substr(17)) != kFormatVersion) {
          throw ParseError("format_version", "unsupported version");
        }
        version = true;
        continue;
      }
      const auto colon = line.find(": ");
      if (colon != std::string::npos && line.size() > 2) {
        out.metadata.emplace_back(line.substr(2, colon - 2), line.substr(colon + 2));
      }
      continue;
    }
    if (!header) {
      if (line != "u,t,x,y,theta,v,a_T,a_N,kappa,omega") {
        throw ParseError("header", "unexpected column header");
      }
      header = true;
      continue;
    }
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = std::min(line.find(',', pos), line.size());
      vals.push_back(parse_double(line.substr(pos, comma - pos), line_no));
      pos = comma + 1;
    }
    if (vals.size() != 10) {
      throw ParseError("line " + std::to_string(line_no), "expected 10 columns");
    }
    out.samples.push_back({vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7],
                           vals[8], vals[9]});
  }
  if (!version) throw ParseError("format_version", "missing format_version line");
  if (!header) throw ParseError("header", "missing column header");
  return out;
}

ResultFile read_result(const std::filesystem::path& path) { return parse_result(read_text(path)); }

std::vector<Vec2> equal_time_points(const std::vector<TrajectorySample>& samples, int markers) {
  if (samples.size() < 2) throw DomainError("plot needs at least two samples");
  std::vector<Vec2> out;
  if (markers < 2) return out;
  const double t_end = samples.back().t;
  std::size_t k = 1;
  for (int m = 0; m < markers; ++m) {
    const double t = t_end * m / (markers - 1);
    while (k + 1 < samples.size() && samples[k].t < t) ++k;
    const auto& a = samples[k - 1];
    const auto& b = samples[k];
    const double span = b.t - a.t;
    const double w = span > 0.0 ? std::clamp((t - a.t) / span, 0.0, 1.0) : 1.0;
    out.emplace_back(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y));
  }
  return out;
}

std::string plot_svg(const std::vector<TrajectorySample>& samples, const PlotOptions& options) {
  if (samples.size() < 2) throw DomainError("plot needs at least two samples");
  // Outline polygons of the obstacles.
  std::vector<std::vector<Vec2>> outlines;
  for (const auto& o : options.obstacles.obstacles) {
    std::vector<Vec2> poly;
    constexpr int kSides = 96;
    for (int i = 0; i < kSides; ++i) {
      const double phi = -std::numbers::pi + 2.0 * std::numbers::pi * i / kSides;
      const double r = o.rho(phi).rho;
      poly.push_back(o.center() + r * Vec2(std::cos(phi), std::sin(phi)));
    }
    outlines.push_back(std::move(poly));
  }

  Vec2 lo(samples[0].x, samples[0].y), hi = lo;
  auto grow = [&](const Vec2& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& s : samples) grow({s.x, s.y});
  for (const auto& poly : outlines) {
    for (const auto& p : poly) grow(p);
  }
  const double span = std::max({hi.x() - lo.x(), hi.y() - lo.y(), 1e-9});
  const double pad = 0.05 * span;
  lo.array() -= pad;
  hi.array() += pad;
  const double width = 800.0;
  const double scale = width / std::max(hi.x() - lo.x(), hi.y() - lo.y());
  const double w_px = (hi.x() - lo.x()) * scale;
  const double h_px = (hi.y() - lo.y()) * scale;
  auto px = [&](const Vec2& p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f,%.3f", (p.x() - lo.x()) * scale, (hi.y() - p.y()) * scale);
    return std::string(buf);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<!-- format_version " << kFormatVersion << " -->\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_px << "\" height=\"" << h_px
      << "\" viewBox=\"0 0 " << w_px << ' ' << h_px << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    std::string title;
    for (char c : options.title) {
      if (c == '<') title += "&lt;";
      else if (c == '>') title += "&gt;";
      else if (c == '&') title += "&amp;";
      else title += c;
    }
    svg << "<title>" << title << "</title>\n";
  }
  for (const auto& poly : outlines) {
    svg << "<polygon class=\"obstacle\" fill=\"#ddd\" stroke=\"#555\" points=\"";
    for (std::size_t i = 0; i < poly.size(); ++i) svg << (i ? " " : "") << px(poly[i]);
    svg << "\"/>\n";
  }
  svg << "<polyline class=\"path\" fill=\"none\" stroke=\"#1f4e9c\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    svg << (i ? " " : "") << px({samples[i].x, samples[i].y});
  }
  svg << "\"/>\n";
  for (const Vec2& m : equal_time_points(samples, options.markers)) {
    const std::string p = px(m);
    const auto comma = p.find(',');
    svg << "<circle class=\"marker\" cx=\"" << p.substr(0, comma) << "\" cy=\""
        << p.substr(comma + 1) << "\" r=\"4\" fill=\"#c0392b\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(const std::vector<TrajectorySample>& samples, const std::filesystem::path& path,
               const PlotOptions& options) {
  write_text(path, plot_svg(samples, options));
}

}  // namespace comfort
