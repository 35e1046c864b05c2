#include "anisomax/experiment.hpp"

#include "anisomax/maximal.hpp"
#include "anisomax/surface.hpp"
#include "anisomax/surface_checks.hpp"
#include "anisomax/version.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace anisomax {

namespace fs = std::filesystem;
using nlohmann::json;

bool ExperimentResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

double ExperimentResult::metric(const std::string& key) const {
  for (const auto& [k, v] : metrics)
    if (k == key) return v;
  throw Error(ErrorCode::InputInvalid, "no metric '" + key + "'");
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"validate-dilation", "whitney",           "stopping",
                                              "surface-classify",  "kernel-decay",      "maximal-weak-type",
                                              "full-pipeline"};
  return names;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigInvalid:
    case ErrorCode::ResolutionTooCoarse:
    case ErrorCode::NonSquare:
    case ErrorCode::EigenvalueNotExpanding:
      return 2;
    case ErrorCode::BudgetExceeded:
      return 3;
    default:
      return 1;
  }
}

AtomicSum random_atoms(const DilationStructure& D, const RandomAtomSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> tau(spec.tau_lo, spec.tau_hi);
  std::uniform_int_distribution<std::int64_t> idx(-spec.extent, spec.extent - 1);
  std::uniform_real_distribution<double> lam(spec.lambda_lo, spec.lambda_hi);
  AtomicSum f{&D, {}};
  for (int i = 0; i < spec.count; ++i) {
    GridCube q{0, tau(rng), std::vector<std::int64_t>(D.dim)};
    for (auto& v : q.index) v = idx(rng);
    const double l = lam(rng);
    f.terms.push_back({make_atom(D, q, spec.profile, rng()), l});
  }
  return f;
}

AtomicSum build_atoms(const DilationStructure& D, const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.atom_list.empty()) return random_atoms(D, cfg.random_atoms, seed);
  AtomicSum f{&D, {}};
  for (const auto& a : cfg.atom_list) f.terms.push_back({make_atom(D, a.cube, a.profile, a.seed), a.lambda});
  return f;
}

namespace {

std::string fd(double v) { return format_double(v); }

std::string index_text(const GridCube& c) {
  std::string s;
  for (std::size_t i = 0; i < c.index.size(); ++i) s += (i ? ";" : "") + std::to_string(c.index[i]);
  return s;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

struct Run {
  fs::path dir;
  ExperimentResult res;
  std::vector<std::string> notes;

  void check(const std::string& name, bool pass, const std::string& detail) {
    res.checks.push_back({name, pass, detail});
  }
  void metric(const std::string& k, double v) { res.metrics.emplace_back(k, v); }
  void warn(const std::string& w) { res.warnings.push_back(w); }
  void note(const std::string& n) { notes.push_back(n); }
  fs::path file(const std::string& name) {
    res.files.push_back(name);
    return dir / name;
  }
};

class Csv {
 public:
  Csv(Run& run, const std::string& name, const std::vector<std::string>& header)
      : os_(run.file(name), std::ios::binary) {
    if (!os_) throw Error(ErrorCode::ConfigInvalid, "cannot write " + (run.dir / name).string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

 private:
  std::ofstream os_;
};

std::vector<WeightedCube> weighted(const AtomicSum& f) {
  std::vector<WeightedCube> Q;
  for (const auto& t : f.terms) Q.push_back({t.atom.support, t.lambda});
  return Q;
}

std::vector<WeightedCube> covered(const std::vector<WeightedCube>& Q, const WhitneyResult& W) {
  std::vector<WeightedCube> out;
  for (std::size_t j = 0; j < Q.size(); ++j)
    if (W.assigned[j] >= 0) out.push_back(Q[j]);
  return out;
}

// Hard conditions only; mixed-dimension witnesses are advisory.
bool hard_pass(const VerifyReport& r, std::string* failing = nullptr) {
  bool ok = true;
  for (const auto& c : r.conditions) {
    if (c.name == "same_dimensions" || c.pass) continue;
    ok = false;
    if (failing) *failing += (failing->empty() ? "" : ";") + c.name;
  }
  return ok;
}

double worst(const VerifyReport& r, const char* name) {
  const auto* c = r.find(name);
  return c ? c->worst_ratio : 0.0;
}

GraphSurface surface_of(const ExperimentConfig& cfg) {
  return GraphSurface::from_name(cfg.surface, static_cast<int>(cfg.matrix.rows()), cfg.cutoff);
}

// Points of supp mu independent of the grid used for E.
std::vector<Vec> fresh_support(const GraphSurface& S, std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  const double R = S.cutoff_radius();
  std::uniform_real_distribution<double> u(-R, R);
  std::vector<Vec> pts;
  Vec y(S.param_dim());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < y.size(); ++k) y(k) = u(rng);
    pts.push_back(S.point(y));
  }
  return pts;
}

int support_axis(const ExperimentConfig& cfg) {
  // per-axis count is for curves; surfaces get a square-root share.
  const int m = static_cast<int>(cfg.matrix.rows()) - 1;
  return m == 1 ? cfg.support_per_axis
                : std::max(8, static_cast<int>(std::pow(static_cast<double>(cfg.support_per_axis), 1.0 / m)));
}

std::vector<std::vector<WeightedCube>> instances(const DilationStructure& D, const ExperimentConfig& cfg) {
  std::vector<std::vector<WeightedCube>> out;
  if (cfg.instances == 0) {
    out.push_back(weighted(build_atoms(D, cfg, cfg.seed)));
    return out;
  }
  for (int i = 0; i < cfg.instances; ++i) {
    RandomCubeSpec spec = cfg.cubes;
    spec.seed = cfg.seed + static_cast<std::uint64_t>(i);
    out.push_back(random_weighted_cubes(D, spec));
  }
  return out;
}

// ---------------------------------------------------------------------------

void run_validate_dilation(const ExperimentConfig& cfg, Run& run) {
  auto D = validate_dilation(cfg.matrix);
  const double p = fit_diameter_exponent(D, -40, -10);
  const double align = slow_alignment_error(D, -40);
  Eigen::JacobiSVD<Mat> svd(D.power(-D.norm_power));
  const double contraction = svd.singularValues()(0);
  run.metric("a", D.det_scale);
  run.metric("r", D.r_min);
  run.metric("n", D.block_size);
  run.metric("norm_power", D.norm_power);
  run.metric("diameter_exponent", p);
  run.metric("slow_alignment_error", align);
  run.note("a=" + fd(D.det_scale) + " r=" + fd(D.r_min) + " n=" + std::to_string(D.block_size) +
           " norm_power=" + std::to_string(D.norm_power));
  run.note("fitted diameter exponent p=" + fd(p) + " over tau in [-40,-10]");

  Csv csv(run, "dilation.csv", {"tau", "diameter", "diameter_over_r_tau"});
  for (int tau = -40; tau <= 0; ++tau) {
    const double diam = cube_diameter(D, tau);
    csv.row({std::to_string(tau), fd(diam), fd(diam / std::pow(D.r_min, tau))});
  }
  run.check("slow direction alignment < 0.05 at tau=-40", align < 0.05, fd(align));
  run.check("||A^-m|| <= 1/2 at m=norm_power", contraction <= 0.5 + 1e-12, fd(contraction));
}

void run_whitney(const ExperimentConfig& cfg, Run& run) {
  auto D = validate_dilation(cfg.matrix);
  auto inst = instances(D, cfg);
  Csv sel(run, "whitney.csv", {"instance", "sigma", "tau", "index", "members", "lambda_sum"});
  Csv chk(run, "whitney_checks.csv", {"instance", "condition", "pass", "worst_ratio"});
  int failures = 0;
  long selected = 0;
  std::string first_failure;
  WhitneyOptions wo;
  wo.c_w = cfg.constants.c_w;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& Q = inst[i];
    auto W = whitney_decompose(D, Q, cfg.alpha, wo);
    auto rep = verify_whitney(D, W, Q, cfg.alpha, cfg.constants.c_w);
    std::vector<long> members(W.selected.size(), 0);
    std::vector<double> mass(W.selected.size(), 0.0);
    for (std::size_t j = 0; j < Q.size(); ++j)
      if (W.assigned[j] >= 0) {
        ++members[static_cast<std::size_t>(W.assigned[j])];
        mass[static_cast<std::size_t>(W.assigned[j])] += Q[j].lambda;
      }
    for (std::size_t s = 0; s < W.selected.size(); ++s)
      sel.row({std::to_string(i), std::to_string(W.selected[s].sigma), std::to_string(W.selected[s].tau),
               index_text(W.selected[s]), std::to_string(members[s]), fd(mass[s])});
    for (const auto& c : rep.conditions)
      chk.row({std::to_string(i), c.name, c.pass ? "1" : "0", fd(c.worst_ratio)});
    selected += static_cast<long>(W.selected.size());
    if (!rep.pass()) {
      ++failures;
      if (first_failure.empty()) first_failure = "instance " + std::to_string(i) + ": " + rep.to_string();
    }
    if (W.repairs > 0) run.warn("instance " + std::to_string(i) + " needed " + std::to_string(W.repairs) + " repairs");
  }
  run.metric("instances", static_cast<double>(inst.size()));
  run.metric("failures", failures);
  run.metric("selected", static_cast<double>(selected));
  run.check("Whitney conditions 1-3 (C_W=" + fd(cfg.constants.c_w) + ") on " + std::to_string(inst.size()) +
                " instances",
            failures == 0, failures ? first_failure : "all pass");
}

void run_stopping(const ExperimentConfig& cfg, Run& run) {
  auto D = validate_dilation(cfg.matrix);
  auto S = surface_of(cfg);
  auto sample = support_sample(S, support_axis(cfg));
  auto fresh = fresh_support(S, cfg.seed ^ 0x9e3779b97f4a7c15ULL, 997);
  auto inst = instances(D, cfg);

  Csv sum(run, "stopping.csv",
          {"instance", "cubes", "whitney", "covered", "selected", "pass", "i", "ii", "iii", "iv", "e_volume"});
  Csv kap(run, "kappa.csv", {"instance", "cube", "tau", "index", "kappa", "class"});
  Csv mut(run, "mutations.csv", {"instance", "cube", "shift", "rejected", "failing"});
  std::ofstream trace(run.file("trace.txt"), std::ios::binary);

  int failures = 0, mutated = 0, rejected = 0;
  std::string first_failure;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const auto& Q = inst[i];
    auto W = whitney_decompose(D, Q, cfg.alpha, WhitneyOptions{cfg.constants.c_w});
    auto inQ = covered(Q, W);
    auto R = stopping_time(D, W.selected, inQ, cfg.alpha, {}, sample);
    StoppingCheckOptions opt;
    opt.c_i = cfg.constants.c_i;
    opt.c_iv = cfg.constants.c_iv;
    opt.support = fresh;
    opt.seed = cfg.seed + i;
    auto rep = verify_stopping(D, R, W.selected, inQ, cfg.alpha, opt);
    std::string failing;
    const bool ok = hard_pass(rep, &failing);
    const auto* ci = rep.find("i");
    sum.row({std::to_string(i), std::to_string(Q.size()), std::to_string(W.selected.size()),
             std::to_string(inQ.size()), std::to_string(R.selected.size()), ok ? "1" : "0", fd(worst(rep, "i")),
             fd(worst(rep, "ii")), fd(worst(rep, "iii")), fd(worst(rep, "iv")),
             quoted(ci ? ci->detail : std::string())});
    for (std::size_t j = 0; j < inQ.size(); ++j)
      kap.row({std::to_string(i), std::to_string(j), std::to_string(inQ[j].cube.tau), index_text(inQ[j].cube),
               std::to_string(R.kappa[j]), R.classification[j] == QClass::C1 ? "C1" : "C2"});
    trace << "# instance " << i << '\n' << R.trace_text();
    if (!ok) {
      ++failures;
      if (first_failure.empty()) first_failure = "instance " + std::to_string(i) + ": " + rep.to_string();
    }
    if (!R.mixed_dimension_witnesses.empty())
      run.warn("instance " + std::to_string(i) + ": " + std::to_string(R.mixed_dimension_witnesses.size()) +
               " cubes lie in S* of different tau");

    if (mutated < cfg.mutations && !inQ.empty()) {
      ++mutated;
      std::size_t big = 0;
      for (std::size_t j = 0; j < inQ.size(); ++j)
        if (inQ[j].lambda > inQ[big].lambda) big = j;
      StoppingCheckOptions mo = opt;
      mo.check_i = false;
      bool both = true;
      for (int shift : {-5, 5}) {
        auto bad = R;
        bad.kappa[big] += shift;
        std::string why;
        const bool caught = !hard_pass(verify_stopping(D, bad, W.selected, inQ, cfg.alpha, mo), &why);
        both = both && caught;
        mut.row({std::to_string(i), std::to_string(big), std::to_string(shift), caught ? "1" : "0", why});
      }
      rejected += both;
    }
  }
  run.metric("instances", static_cast<double>(inst.size()));
  run.metric("failures", failures);
  run.metric("mutations", mutated);
  run.metric("mutations_rejected", rejected);
  run.check("stopping conditions (i)-(iv) (C=" + fd(cfg.constants.c_i) + ", C_iv=" + fd(cfg.constants.c_iv) +
                ") on " + std::to_string(inst.size()) + " instances",
            failures == 0, failures ? first_failure : "all pass");
  if (cfg.mutations > 0)
    run.check("perturbed kappa rejected on " + std::to_string(cfg.mutations) + " instances",
              mutated == cfg.mutations && rejected == mutated,
              std::to_string(rejected) + "/" + std::to_string(mutated) + " rejected in both directions");
}

void run_surface_classify(const ExperimentConfig& cfg, Run& run) {
  auto D = validate_dilation(cfg.matrix);
  auto S = surface_of(cfg);
  auto rep = mercury_check(S, D, cfg.epsilon, cfg.zeta, cfg.s_values);
  Csv csv(run, "mercury.csv", {"s", "pieces", "in_I1", "in_I2", "flagged", "window_edge"});
  long i1 = 0, edge = 0;
  for (const auto& r : rep.rows) {
    csv.row({std::to_string(r.s), std::to_string(r.pieces), std::to_string(r.in_I1), std::to_string(r.in_I2),
             std::to_string(r.flagged), std::to_string(r.window_edge)});
    i1 += r.in_I1;
    edge += r.window_edge;
  }
  run.metric("growth", rep.growth);
  run.metric("eta", rep.eta);
  run.metric("I1_total", static_cast<double>(i1));
  run.note("growth=" + fd(rep.growth) + " eta=(d-1)eps-growth=" + fd(rep.eta));
  if (edge > 0) run.warn(std::to_string(edge) + " pieces had their worst cube at an end of the tau window");
  if (S.kind() == GraphSurface::Kind::CircleArc)
    run.check("|I1| = 0 for every s (constant curvature)", i1 == 0, "I1 total " + std::to_string(i1));
  if (S.kind() == GraphSurface::Kind::QuarticFlat)
    run.check("fitted eta > 0.05", rep.eta > 0.05, "eta=" + fd(rep.eta));
}

void run_kernel_decay(const ExperimentConfig& cfg, Run& run) {
  auto S = surface_of(cfg);
  const int d = S.dim();
  auto nu = S.quadrature(cfg.kernel.panels, 8);
  Vec half(d), h = Vec::Constant(d, cfg.kernel.spacing);
  for (int i = 0; i < d; ++i) half(i) = cfg.kernel.half_extent[static_cast<std::size_t>(i)];
  auto L = Lattice::centered(half, h);
  auto K = autocorrelation_kernel(nu, L, cfg.kernel.r_lo / 4);
  auto fit = check_kernel_decay(K, cfg.kernel.r_lo, cfg.kernel.r_hi, cfg.kernel.bins);
  SampledField flat(L, "constant control");
  std::fill(flat.values.begin(), flat.values.end(), 1.0);
  auto ctl = check_kernel_decay(flat, cfg.kernel.r_lo, cfg.kernel.r_hi, cfg.kernel.bins);

  Csv csv(run, "kernel_decay.csv", {"radius", "kernel_max", "control_max"});
  for (std::size_t i = 0; i < fit.radii.size(); ++i)
    csv.row({fd(fit.radii[i]), fd(fit.maxima[i]), i < ctl.maxima.size() ? fd(ctl.maxima[i]) : ""});
  write_field_binary(K, (run.dir / "kernel.amxf").string());
  run.res.files.push_back("kernel.amxf");
  run.metric("slope", fit.slope);
  run.metric("control_slope", ctl.slope);
  run.metric("mass_squared_error", std::abs(K.integral() - S.mass() * S.mass()) / (S.mass() * S.mass()));
  run.check("kernel slope in [-1.3, -0.7]", fit.slope >= -1.3 && fit.slope <= -0.7, "slope=" + fd(fit.slope));
  run.check("control slope in [-0.2, 0.2]", std::abs(ctl.slope) <= 0.2, "slope=" + fd(ctl.slope));
}

void weak_rows(Csv& dist, const std::string& tag, const DistributionReport& r) {
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) dist.row({tag, fd(r.thresholds[i]), fd(r.measures[i])});
}

void note_tails(Run& run, const std::string& tag, const MaximalField& M) {
  if (!M.tail_ok) run.warn(tag + ": " + M.warning);
}

void run_maximal_weak_type(const ExperimentConfig& cfg, Run& run) {
  auto D = validate_dilation(cfg.matrix);
  auto S = surface_of(cfg);
  auto mu = MeasureRef::whole(S);
  Csv csv(run, "weak_type.csv",
          {"tau", "atoms", "h1", "ratio", "argmax_threshold", "field_max", "lower_tail", "upper_tail", "k_lo", "k_hi"});
  Csv dist(run, "distribution.csv", {"tau", "threshold", "measure"});
  double lo = INFINITY, hi = 0;
  for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
    const int tau = cfg.scales[i];
    RandomAtomSpec spec = cfg.random_atoms;
    spec.tau_lo = spec.tau_hi = tau;
    if (spec.count < 1) throw Error(ErrorCode::ConfigInvalid, "maximal-weak-type needs atoms.random.count >= 1");
    auto f = random_atoms(D, spec, cfg.seed * 1000003ULL + i);
    // The family at tau is read against the k window moved with it.
    KRange k{cfg.k_range.lo + tau, cfg.k_range.hi + tau};
    auto L = covering_lattice(D, f, mu, k, cfg.lattice_dims);
    auto w = weak_type(D, f, mu, k, L);
    csv.row({std::to_string(tau), std::to_string(f.terms.size()), fd(f.h1_norm()), fd(w.ratio),
             fd(w.distribution.argmax_threshold), fd(w.maximal.field.max_abs()), fd(w.maximal.lower_tail),
             fd(w.maximal.upper_tail), std::to_string(k.lo), std::to_string(k.hi)});
    weak_rows(dist, std::to_string(tau), w.distribution);
    note_tails(run, "tau=" + std::to_string(tau), w.maximal);
    lo = std::min(lo, w.ratio);
    hi = std::max(hi, w.ratio);
    run.metric("ratio_tau" + std::to_string(tau), w.ratio);
  }
  run.metric("spread", hi / lo);
  run.check("weak-type ratio varies by less than 3x across scales", hi / lo < 3.0,
            "min=" + fd(lo) + " max=" + fd(hi) + " spread=" + fd(hi / lo));
}

void run_full_pipeline(const ExperimentConfig& cfg, Run& run) {
  auto D = validate_dilation(cfg.matrix);
  auto S = surface_of(cfg);
  auto mu = MeasureRef::whole(S);
  auto f = build_atoms(D, cfg, cfg.seed);
  if (f.terms.empty()) throw Error(ErrorCode::ConfigInvalid, "full-pipeline needs at least one atom");
  auto Q = weighted(f);

  auto W = whitney_decompose(D, Q, cfg.alpha, WhitneyOptions{cfg.constants.c_w});
  auto wrep = verify_whitney(D, W, Q, cfg.alpha, cfg.constants.c_w);
  auto inQ = covered(Q, W);
  auto sample = support_sample(S, support_axis(cfg));
  auto R = stopping_time(D, W.selected, inQ, cfg.alpha, {}, sample);
  auto fresh = fresh_support(S, cfg.seed ^ 0x9e3779b97f4a7c15ULL, 997);
  StoppingCheckOptions so;
  so.c_i = cfg.constants.c_i;
  so.c_iv = cfg.constants.c_iv;
  so.support = fresh;
  so.seed = cfg.seed;
  auto srep = verify_stopping(D, R, W.selected, inQ, cfg.alpha, so);
  run.check("Whitney conditions 1-3", wrep.pass(), wrep.pass() ? "pass" : wrep.to_string());
  run.check("stopping conditions (i)-(iv)", hard_pass(srep), hard_pass(srep) ? "pass" : srep.to_string());
  {
    Csv ev(run, "e_volume.csv", {"whitney", "selected", "ratio", "detail"});
    const auto* ci = srep.find("i");
    ev.row({std::to_string(W.selected.size()), std::to_string(R.selected.size()), fd(worst(srep, "i")),
            quoted(ci ? ci->detail : std::string())});
    std::map<int, long> hist;
    for (int k : R.kappa) ++hist[k];
    Csv kh(run, "kappa_hist.csv", {"kappa", "count"});
    for (const auto& [k, n] : hist) kh.row({std::to_string(k), std::to_string(n)});
  }
  run.metric("e_volume_ratio", worst(srep, "i"));

  // Piece split: the caps sum back to mu.
  auto P = partition_measure(S, cfg.pipeline_s, cfg.epsilon);
  classify_pieces(P, D, cfg.zeta);
  {
    Csv pc(run, "pieces.csv", {"s", "rho", "center", "mass", "in_I1", "in_I2", "min_abs_curvature", "max_mass_ratio"});
    for (const auto& p : P.pieces()) {
      std::string c;
      for (int i = 0; i < p.center.size(); ++i) c += (i ? ";" : "") + fd(p.center(i));
      pc.row({std::to_string(p.s), std::to_string(p.rho), c, fd(p.nodes.mass()), p.in_I1 ? "1" : "0",
              p.in_I2 ? "1" : "0", fd(p.min_abs_curvature), fd(p.max_mass_ratio)});
    }
    // Smooth probes on the same cubes, so quadrature noise from jumps stays out.
    AtomicSum probe{&D, {}};
    for (const auto& t : f.terms)
      probe.terms.push_back({make_atom(D, t.atom.support, AtomProfile::TensorBump, 0), t.lambda});
    Vec ext = min_atom_extent(probe);
    Box pb = dilated_support_box(D, probe, mu, KRange{0, 0});
    std::vector<int> dims(static_cast<std::size_t>(D.dim));
    for (int i = 0; i < D.dim; ++i)
      dims[static_cast<std::size_t>(i)] = static_cast<int>(std::ceil((pb.hi(i) - pb.lo(i)) / (ext(i) / 8)));
    auto Ls = Lattice::covering(pb, dims);
    auto whole = convolve_dilated(D, probe, mu, 0, Ls);
    SampledField sum(Ls);
    for (std::size_t rho = 0; rho < P.pieces().size(); ++rho) {
      auto part = convolve_dilated(D, probe, MeasureRef::piece(P, static_cast<long>(rho)), 0, Ls);
      for (std::size_t c = 0; c < sum.values.size(); ++c) sum.values[c] += part.values[c];
    }
    double err = 0;
    for (std::size_t c = 0; c < sum.values.size(); ++c) err = std::max(err, std::abs(sum.values[c] - whole.values[c]));
    const double rel = err / std::max(whole.max_abs(), 1e-300);
    run.metric("piece_split_error", rel);
    run.check("pieces sum to the whole convolution (k=0)", rel < 1e-3, "relative error " + fd(rel));
  }

  auto L = covering_lattice(D, f, mu, cfg.k_range, cfg.lattice_dims);
  ExclusionSet E = [&R](const Vec& x) { return R.in_exceptional(x); };
  auto all = weak_type(D, f, mu, cfg.k_range, L);
  note_tails(run, "pipeline", all.maximal);
  auto outside = distribution_function(all.maximal.field, log_thresholds(all.maximal.field.max_abs()), E);
  const double h1 = f.h1_norm();
  auto at_alpha = distribution_function(all.maximal.field, {cfg.alpha}, E);
  const double lhs = cfg.alpha * at_alpha.measures[0];
  write_field_binary(all.maximal.field, (run.dir / "maximal.amxf").string());
  run.res.files.push_back("maximal.amxf");

  Csv wt(run, "pipeline_weak.csv", {"tau", "atoms", "h1", "ratio", "ratio_outside_E"});
  wt.row({"all", std::to_string(f.terms.size()), fd(h1), fd(all.ratio), fd(outside.weak_ratio / h1)});
  std::set<int> taus;
  for (const auto& t : f.terms) taus.insert(t.atom.support.tau);
  if (taus.size() > 1)
    for (int tau : taus) {
      AtomicSum g{&D, {}};
      for (const auto& t : f.terms)
        if (t.atom.support.tau == tau) g.terms.push_back(t);
      auto w = weak_type(D, g, mu, cfg.k_range, L);
      auto o = distribution_function(w.maximal.field, log_thresholds(w.maximal.field.max_abs()), E);
      wt.row({std::to_string(tau), std::to_string(g.terms.size()), fd(g.h1_norm()), fd(w.ratio),
              fd(o.weak_ratio / g.h1_norm())});
    }
  {
    Csv dist(run, "distribution.csv", {"set", "threshold", "measure"});
    weak_rows(dist, "all", all.distribution);
    weak_rows(dist, "outside_E", outside);
  }
  run.metric("weak_ratio", all.ratio);
  run.metric("weak_ratio_outside_E", outside.weak_ratio / h1);
  run.metric("alpha_measure_outside_E", lhs);
  run.metric("h1", h1);
  run.check("alpha |{Mf > alpha} \\ E| <= " + fd(cfg.constants.c_weak) + " ||f||_H1", lhs <= cfg.constants.c_weak * h1,
            "lhs=" + fd(lhs) + " rhs=" + fd(cfg.constants.c_weak * h1));
}

json module_constants() {
  return {{"lattice_resolution_factor", 8},
          {"threshold_count", 64},
          {"threshold_lo_fraction", 1e-3},
          {"tail_tolerance", MaximalOptions{}.tail_tolerance},
          {"quadrature_nodes_per_panel", 8},
          {"min_panels_per_axis", 16},
          {"piece_budget", kPieceBudget},
          {"classify_enumerate_limit", ClassifyOptions{}.enumerate_limit},
          {"classify_probe_nodes", ClassifyOptions{}.probe_nodes},
          {"whitney_max_levels", WhitneyOptions{}.max_levels},
          {"stopping_max_levels", StoppingOptions{}.max_levels},
          {"stopping_volume_samples", StoppingCheckOptions{}.volume_samples},
          {"fresh_support_points", 997},
          {"mutation_shift", 5},
          {"kernel_decay_pass_slope", -0.7},
          {"kernel_slope_window", {-1.3, -0.7}},
          {"control_slope_window", {-0.2, 0.2}},
          {"eta_threshold", 0.05},
          {"weak_scale_spread_limit", 3.0},
          {"piece_split_tolerance", 1e-3}};
}

json versions() {
  return {{"anisomax", ANISOMAX_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& experiment,
                                const std::string& out_dir) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end())
    throw Error(ErrorCode::ConfigInvalid, "unknown experiment '" + experiment + "'");
  Run run;
  run.dir = out_dir;
  run.res.experiment = experiment;
  std::error_code ec;
  fs::create_directories(run.dir, ec);
  if (ec) throw Error(ErrorCode::ConfigInvalid, "cannot create " + out_dir + ": " + ec.message());

  {
    json manifest{{"experiment", experiment},
                  {"seed", cfg.seed},
                  {"config", cfg.resolved},
                  {"versions", versions()},
                  {"constants", module_constants()}};
    std::ofstream(run.file("manifest.json"), std::ios::binary) << manifest.dump(2) << '\n';
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (experiment == "validate-dilation") run_validate_dilation(cfg, run);
  if (experiment == "whitney") run_whitney(cfg, run);
  if (experiment == "stopping") run_stopping(cfg, run);
  if (experiment == "surface-classify") run_surface_classify(cfg, run);
  if (experiment == "kernel-decay") run_kernel_decay(cfg, run);
  if (experiment == "maximal-weak-type") run_maximal_weak_type(cfg, run);
  if (experiment == "full-pipeline") run_full_pipeline(cfg, run);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  run.res.exit_code = run.res.pass() ? 0 : 1;
  std::ofstream sum(run.file("summary.txt"), std::ios::binary);
  sum << "experiment: " << experiment << "\nseed: " << cfg.seed << "\n";
  for (const auto& n : run.notes) sum << n << '\n';
  for (const auto& [k, v] : run.res.metrics) sum << k << " = " << fd(v) << '\n';
  for (const auto& c : run.res.checks) sum << (c.pass ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
  for (const auto& w : run.res.warnings) sum << "warning: " << w << '\n';
  sum << "result: " << (run.res.pass() ? "pass" : "fail") << "\nelapsed_seconds: " << fd(secs) << '\n';
  return run.res;
}

}  // namespace anisomax
