#include "ecodrive/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ecodrive::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Shortest form that reads back to the same double.
std::string num(double x)
{
  if (std::isinf(x)) { return x > 0 ? "inf" : "-inf"; }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, end);
}

double parse_double(std::string_view s, std::size_t line)
{
  if (s == "inf") { return kInf; }
  if (s == "-inf") { return -kInf; }
  double x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return x;
}

long parse_long(std::string_view s, std::size_t line)
{
  long x = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  }
  return x;
}

std::vector<std::string> split(const std::string & line)
{
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) { cell.pop_back(); }
    while (!cell.empty() && cell.front() == ' ') { cell.erase(cell.begin()); }
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') { out.emplace_back(); }
  return out;
}

/// Data rows of a CSV with the given header; blank lines are skipped.
std::vector<std::vector<std::string>> read_csv(std::istream & in, const std::vector<std::string> & header)
{
  std::string line;
  if (!std::getline(in, line)) { return {}; }
  std::string joined;
  for (const auto & h : header) { joined += (joined.empty() ? "" : ",") + h; }
  if (split(line) != header) { throw FormatError("expected CSV header '" + joined + "'"); }
  std::vector<std::vector<std::string>> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") { continue; }
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw FormatError("line " + std::to_string(n) + ": expected " + std::to_string(header.size()) + " fields");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double number(const Json & j, const char * what)
{
  if (j.is_string() && j.get<std::string>() == "inf") { return kInf; }
  if (!j.is_number()) { throw FormatError(std::string(what) + ": expected a number"); }
  return j.get<double>();
}

const Json & field(const Json & j, const char * key)
{
  if (!j.is_object() || !j.contains(key)) { throw FormatError(std::string("missing field '") + key + "'"); }
  return j.at(key);
}

Json point_json(const Point2 & p) { return Json::array({p.x(), p.y()}); }

Point2 point_from(const Json & j)
{
  if (!j.is_array() || j.size() != 2) { throw FormatError("expected [s, v]"); }
  return {number(j[0], "s"), number(j[1], "v")};
}

Json stat_json(const Stat & s) { return {{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"std", s.stddev}}; }

}  // namespace

Json to_json(const ConvexRegion2 & r)
{
  Json hp = Json::array();
  for (const auto & h : r.halfplanes()) { hp.push_back(Json::array({h.a.x(), h.a.y(), h.b})); }
  Json j{{"halfplanes", hp}, {"vertices", nullptr}};
  if (r.vertices()) {
    Json vs = Json::array();
    for (const auto & v : *r.vertices()) { vs.push_back(point_json(v)); }
    j["vertices"] = vs;
  }
  if (r.empty()) { j["empty"] = true; }
  return j;
}

ConvexRegion2 region_from_json(const Json & j)
{
  if (j.contains("empty") && j.at("empty").get<bool>()) { return ConvexRegion2::empty_region(); }
  const Json & vs = field(j, "vertices");
  if (!vs.is_null()) {
    std::vector<Point2> pts;
    for (const auto & p : vs) { pts.push_back(point_from(p)); }
    if (pts.empty()) { return ConvexRegion2::empty_region(); }
    return convex_hull(pts);
  }
  std::vector<HalfPlane> hs;
  for (const auto & h : field(j, "halfplanes")) {
    if (!h.is_array() || h.size() != 3) { throw FormatError("expected [a_s, a_v, b]"); }
    hs.push_back(make_halfplane({number(h[0], "a_s"), number(h[1], "a_v")}, number(h[2], "b")));
  }
  return ConvexRegion2::from_halfplanes(std::move(hs));
}

Json to_json(const ControllableSet & s)
{
  return {{"t", s.t}, {"target", to_string(s.kind)}, {"s_tl", s.s_tl}, {"region", to_json(s.region)}};
}

ControllableSet controllable_set_from_json(const Json & j)
{
  ControllableSet s;
  s.t = field(j, "t").get<int>();
  const auto tag = field(j, "target").get<std::string>();
  if (tag == to_string(TargetKind::BeforeLight)) {
    s.kind = TargetKind::BeforeLight;
  } else if (tag == to_string(TargetKind::AfterLight)) {
    s.kind = TargetKind::AfterLight;
  } else {
    throw FormatError("unknown target '" + tag + "'");
  }
  s.s_tl = number(field(j, "s_tl"), "s_tl");
  s.region = region_from_json(field(j, "region"));
  return s;
}

Json to_json(const EnergyModel<double> & m, const EnergyFit * fit)
{
  Json P = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) { P.push_back(m.P(r, c)); }
  }
  Json j{{"P", P}};
  if (fit) {
    j["fit"] = {{"rms_residual", fit->rms_residual}, {"total_rel_error", fit->total_rel_error},
      {"projected", fit->projected}, {"iterations", fit->iterations}};
  }
  return j;
}

EnergyModel<double> energy_model_from_json(const Json & j)
{
  const Json & P = field(j, "P");
  if (!P.is_array() || P.size() != 9) { throw FormatError("P must hold 9 numbers (row-major 3x3)"); }
  EnergyModel<double> m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) { m.P(r, c) = number(P[static_cast<std::size_t>(3 * r + c)], "P"); }
  }
  return m;
}

Json to_json(const RouteSpec & r)
{
  Json lights = Json::array();
  for (const auto & l : r.lights) {
    lights.push_back({{"s_tl", l.s_tl}, {"green", l.green}, {"yellow", l.yellow}, {"red", l.red}, {"offset", l.offset}});
  }
  return {{"lights", lights}, {"goal_s", r.goal_s}, {"v_max", r.v_max}, {"a_min", r.a_min}, {"a_max", r.a_max}};
}

RouteSpec route_from_json(const Json & j)
{
  RouteSpec r;
  for (const auto & l : field(j, "lights")) {
    TrafficLight t;
    t.s_tl = number(field(l, "s_tl"), "s_tl");
    t.green = field(l, "green").get<int>();
    t.yellow = field(l, "yellow").get<int>();
    t.red = field(l, "red").get<int>();
    t.offset = l.value("offset", 0);
    r.lights.push_back(t);
  }
  r.goal_s = number(field(j, "goal_s"), "goal_s");
  r.v_max = j.value("v_max", r.v_max);
  r.a_min = j.value("a_min", r.a_min);
  r.a_max = j.value("a_max", r.a_max);
  return r;
}

Json to_json(const PassSchedule & s) { return {{"k_pass", s.k_pass}}; }

PassSchedule schedule_from_json(const Json & j) { return {field(j, "k_pass").get<std::vector<int>>()}; }

Json to_json(const CostToGoTable & t)
{
  Json pts = Json::array();
  for (const auto & p : t.points) {
    pts.push_back(Json::array({p.x.x(), p.x.y(), std::isfinite(p.J) ? Json(p.J) : Json("inf")}));
  }
  return {{"s_tl", t.s_tl}, {"iterations", t.iterations}, {"points", pts}};
}

CostToGoTable cost_to_go_from_json(const Json & j)
{
  CostToGoTable t;
  t.s_tl = number(field(j, "s_tl"), "s_tl");
  t.iterations = j.value("iterations", 0);
  for (const auto & p : field(j, "points")) {
    if (!p.is_array() || p.size() != 3) { throw FormatError("expected [s, v, J]"); }
    t.points.push_back({{number(p[0], "s"), number(p[1], "v")}, number(p[2], "J")});
  }
  rebuild_envelope(t);
  return t;
}

std::vector<EnergySample> read_energy_csv(std::istream & in)
{
  std::vector<EnergySample> out;
  std::size_t n = 1;
  for (const auto & r : read_csv(in, {"v", "u", "dE"})) {
    ++n;
    out.push_back({parse_double(r[0], n), parse_double(r[1], n), parse_double(r[2], n)});
  }
  return out;
}

void write_energy_csv(std::ostream & out, const std::vector<EnergySample> & samples)
{
  out << "v,u,dE\n";
  for (const auto & s : samples) { out << num(s.v) << ',' << num(s.u) << ',' << num(s.dE) << '\n'; }
}

Dataset read_dataset_csv(std::istream & in)
{
  Dataset d;
  std::size_t n = 1;
  for (const auto & r : read_csv(in, {"s", "v", "u", "iter", "scenario"})) {
    ++n;
    DataPair p;
    p.x = {parse_double(r[0], n), parse_double(r[1], n)};
    p.u = parse_double(r[2], n);
    p.iter = static_cast<int>(parse_long(r[3], n));
    p.scenario = static_cast<int>(parse_long(r[4], n));
    d.pairs.push_back(p);
  }
  d.version = d.pairs.size();
  return d;
}

void write_dataset_csv(std::ostream & out, const Dataset & d)
{
  out << "s,v,u,iter,scenario\n";
  for (const auto & p : d.pairs) {
    out << num(p.x.x()) << ',' << num(p.x.y()) << ',' << num(p.u) << ',' << p.iter << ',' << p.scenario << '\n';
  }
}

void write_trajectory_csv(std::ostream & out, const TrajectoryLog & log)
{
  out << "t,s_true,s_hat,v,u,signal,segment,dE,fallback\n";
  for (const auto & r : log.rows) {
    out << r.t << ',' << num(r.s_true) << ',' << num(r.s_hat) << ',' << num(r.v) << ',' << num(r.u) << ','
        << to_string(r.signal) << ',' << r.segment << ',' << num(r.dE) << ','
        << (r.mode == ControlMode::Fallback ? 1 : 0) << '\n';
  }
}

void write_diagnostics_jsonl(std::ostream & out, const TrajectoryLog & log)
{
  for (const auto & r : log.rows) {
    Json j{{"step", r.t}, {"x_hat", Json::array({r.s_hat, r.v_hat})}, {"u", r.u}, {"mode", to_string(r.mode)},
      {"fallback", r.mode == ControlMode::Fallback}, {"solve_ms", r.solve_ms}};
    if (r.mode == ControlMode::Mpc) {
      j["status"] = to_string(r.status);
      j["objective"] = r.objective;
    }
    if (r.windows) {
      j["t_red"] = r.windows->t_red ? Json(*r.windows->t_red) : Json(nullptr);
      j["t_green"] = r.windows->t_green;
    }
    out << j.dump() << '\n';
  }
}

void write_curve_csv(std::ostream & out, const std::vector<CurveRow> & curve)
{
  out << "iter,dataset_size,mean_energy,std_energy,fallback_rate\n";
  for (const auto & c : curve) {
    out << c.iter << ',' << c.dataset_size << ',' << num(c.mean_energy) << ',' << num(c.std_energy) << ','
        << num(c.fallback_rate) << '\n';
  }
}

std::vector<CurveRow> read_curve_csv(std::istream & in)
{
  std::vector<CurveRow> out;
  std::size_t n = 1;
  for (const auto & r : read_csv(in, {"iter", "dataset_size", "mean_energy", "std_energy", "fallback_rate"})) {
    ++n;
    out.push_back({static_cast<int>(parse_long(r[0], n)), static_cast<std::size_t>(parse_long(r[1], n)),
      parse_double(r[2], n), parse_double(r[3], n), parse_double(r[4], n)});
  }
  return out;
}

Json to_json(const McSummary & s)
{
  Json j{{"runs", s.runs}, {"energy_kJ", stat_json(s.energy)}, {"travel_time_s", stat_json(s.travel_time)},
    {"red_violations", s.red_violations}, {"deadline_misses", s.deadline_misses}, {"incomplete", s.incomplete},
    {"runs_with_fallback", s.runs_with_fallback}, {"late_without_fallback", s.late_without_fallback},
    {"fallback_rate", s.fallback_rate}};
  if (!s.solve_ms.empty()) {
    std::vector<double> t = s.solve_ms;
    std::sort(t.begin(), t.end());
    const Stat st = make_stat(t);
    j["solve_ms"] = {{"mean", st.mean}, {"min", st.min}, {"max", st.max}, {"median", t[t.size() / 2]}};
  }
  return j;
}

Json values_to_json(const LearnedArtifacts & a)
{
  Json stages = Json::array();
  for (const auto & s : a.stages) { stages.push_back(to_json(*s)); }
  return {{"converged", a.V ? to_json(*a.V) : Json(nullptr)}, {"stages", stages}};
}

void save_artifacts(const std::filesystem::path & dir, const LearnedArtifacts & a)
{
  std::filesystem::create_directories(dir);
  std::ostringstream ds;
  write_dataset_csv(ds, a.data);
  write_file(dir / "dataset.csv", ds.str());
  write_file(dir / "values.json", values_to_json(a).dump() + "\n");
}

LearnedArtifacts load_artifacts(const std::filesystem::path & dir, const MpcConfig & cfg, int t_max)
{
  LearnedArtifacts a;
  std::istringstream ds(read_file(dir / "dataset.csv"));
  a.data = read_dataset_csv(ds);
  Json j;
  try {
    j = Json::parse(read_file(dir / "values.json"));
  } catch (const Json::parse_error & e) {
    throw FormatError(std::string("values.json: ") + e.what());
  }
  if (a.data.pairs.empty()) { return a; }
  const RobustModel model = cfg.robust_model();
  a.before = std::make_shared<SetSequence>(a.data, light_target(TargetKind::BeforeLight, 0.0), model, t_max, false);
  a.after = std::make_shared<SetSequence>(a.data, light_target(TargetKind::AfterLight, 0.0), model, t_max, true);
  if (!field(j, "converged").is_null()) {
    a.V = std::make_shared<CostToGoTable>(cost_to_go_from_json(j.at("converged")));
  }
  for (const auto & s : field(j, "stages")) { a.stages.push_back(std::make_shared<CostToGoTable>(cost_to_go_from_json(s))); }
  return a;
}

std::uint64_t fnv1a(const std::string & bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path & p)
{
  std::ifstream in(p, std::ios::binary);
  if (!in) { throw Error("cannot open " + p.string()); }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path & p, const std::string & content)
{
  std::ofstream out(p, std::ios::binary);
  if (!out) { throw Error("cannot write " + p.string()); }
  out << content;
  if (!out) { throw Error("write failed: " + p.string()); }
}

}  // namespace ecodrive::io
