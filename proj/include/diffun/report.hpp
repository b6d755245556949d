#pragma once

// JSON views of classifier reports and simulation checks. Non-finite numbers
// are rendered as the strings "inf" / "-inf" / "nan" so the output stays
// valid JSON everywhere.

#include <string>

#include <json.hpp>

#include "diffun/checks.hpp"
#include "diffun/classify.hpp"
#include "diffun/problem.hpp"
#include "diffun/quad.hpp"
#include "diffun/scale.hpp"

namespace diffun {

using json = nlohmann::json;

inline json json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Finite: return "finite";
    case VerdictKind::Infinite: return "infinite";
    default: return "indeterminate";
  }
}

inline const char* to_string(LimitKind k) {
  switch (k) {
    case LimitKind::Finite: return "finite";
    case LimitKind::Infinite: return "infinite";
    default: return "indeterminate";
  }
}

inline json to_json(const ImproperVerdict& v, bool include_partials = false) {
  json j{{"kind", to_string(v.kind)}};
  if (v.kind == VerdictKind::Finite) {
    j["value"] = json_number(v.value);
    j["error_estimate"] = json_number(v.error_estimate);
  }
  if (v.exponent_estimate) j["exponent_estimate"] = json_number(*v.exponent_estimate);
  if (include_partials) {
    json rows = json::array();
    for (const auto& [eps, val] : v.partial_integrals)
      rows.push_back({json_number(eps), json_number(val)});
    j["partial_integrals"] = rows;
  }
  return j;
}

inline json to_json(const ScaleLimit& s) {
  json j{{"kind", to_string(s.kind)}};
  if (s.kind == LimitKind::Finite) j["value"] = json_number(s.value);
  return j;
}

inline json to_json(const EndpointBehavior& e) {
  json j{{"attracted", e.attracted},
         {"indeterminate", e.indeterminate},
         {"scale_limit", to_json(e.scale_limit)}};
  if (e.explosive) j["explosive"] = *e.explosive;
  return j;
}

inline json to_json(const ConvergenceReport& rep, bool include_partials = false) {
  json j;
  j["conclusive"] = rep.conclusive;
  if (!rep.blocking.empty()) j["blocking"] = rep.blocking;

  json red;
  red["D_points"] = rep.reduced.D_points;
  red["indeterminate_candidates"] = rep.reduced.indeterminate_candidates;
  red["alpha"] = json_number(rep.reduced.alpha);
  red["beta"] = json_number(rep.reduced.beta);
  red["x0_in_D"] = rep.reduced.x0_in_D;
  j["reduced"] = red;

  j["recurrence"] = json{{"recurrent", rep.recurrence.recurrent_a},
                         {"indeterminate", rep.recurrence.indeterminate},
                         {"left", to_json(rep.recurrence.left)},
                         {"right", to_json(rep.recurrence.right)}};
  j["scale_limits"] =
      json{{"s_l", to_json(rep.limits.s_l)}, {"s_r", to_json(rep.limits.s_r)}};

  json verdicts;
  if (rep.on_event_A) verdicts["on_event_A"] = to_string(*rep.on_event_A);
  if (rep.on_limit_r) verdicts["on_limit_r"] = to_string(*rep.on_limit_r);
  if (rep.on_limit_l) verdicts["on_limit_l"] = to_string(*rep.on_limit_l);
  j["verdicts"] = verdicts;

  json sup = json::object();
  for (const auto& s : rep.supporting) sup[s.name] = to_json(s.verdict, include_partials);
  j["supporting"] = sup;
  return j;
}

inline json to_json(const MCSummary& s) {
  return json{{"n_paths", s.n_paths},
              {"estimate", json_number(s.estimate)},
              {"std_error", json_number(s.std_error)}};
}

inline json to_json(const KsResult& k) {
  return json{{"statistic", json_number(k.statistic)},
              {"p_value", json_number(k.p_value)},
              {"n1", k.n1},
              {"n2", k.n2}};
}

inline json to_json(const AgreementResult& a) {
  json buckets = json::array();
  for (const auto& b : a.buckets) {
    if (b.n == 0) continue;
    buckets.push_back(json{{"event", b.event},
                           {"expected", to_string(b.expected)},
                           {"n", b.n},
                           {"match", b.match},
                           {"mismatch", b.mismatch},
                           {"undecided", b.undecided},
                           {"fraction", json_number(b.fraction())},
                           {"too_few", b.too_few}});
  }
  return json{{"n_paths", a.n_paths},
              {"agreement_fraction", json_number(a.overall_fraction)},
              {"undecided_fraction", json_number(a.undecided_fraction)},
              {"buckets", buckets}};
}

inline json to_json(const RayKnightResult& r) {
  return json{{"ks", to_json(r.ks)},
              {"local_time", to_json(r.local_time)},
              {"eta", to_json(r.eta)},
              {"truncated_fraction", json_number(r.truncated_fraction)},
              {"bandwidth_flag", r.bandwidth_flag}};
}

inline json to_json(const WilliamsResult& w) {
  return json{{"ks", to_json(w.ks)},
              {"median_tau", json_number(w.median_tau)},
              {"median_xi", json_number(w.median_xi)},
              {"excluded_tau", w.excluded_tau},
              {"excluded_xi", w.excluded_xi}};
}

inline json to_json(const ChernyResult& c) {
  return json{{"expected", to_string(c.expected)},
              {"frac_converging", json_number(c.frac_converging)},
              {"frac_diverging", json_number(c.frac_diverging)},
              {"frac_undecided", json_number(c.frac_undecided)},
              {"refinement_flag", c.refinement_flag},
              {"match", to_json(c.summary)}};
}

inline json to_json(const FubiniResult& f) {
  return json{{"mc", to_json(f.mc)},
              {"rhs", json_number(f.rhs)},
              {"z_score", json_number(f.z_score)}};
}

inline json to_json(const StateSpace& sp) {
  return json{{"l", json_number(sp.l)}, {"r", json_number(sp.r)},
              {"x0", json_number(sp.x0)}};
}

inline json to_json(const Problem& p) {
  json j;
  j["space"] = to_json(p.space);
  j["mu"] = print_expr(p.mu);
  j["sigma"] = print_expr(p.sigma);
  j["f"] = print_expr(p.f);
  j["declared_singularities"] = p.declared_singularities;
  j["f_ae_zero"] = p.f_ae_zero;
  return j;
}

}  // namespace diffun
