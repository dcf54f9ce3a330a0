#include "btlab/report.hpp"

#include "btlab/map_io.hpp"
#include "json.hpp"

namespace btlab {

namespace {

using Json = nlohmann::ordered_json;

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json numbers(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

}  // namespace

std::string extraction_json(const ExtractionResult& res, int indent) {
  Json doc;
  Json gens = Json::array();
  for (const BubbleRecord& r : res.records) {
    Json g;
    g["point"] = r.point;
    g["generation"] = r.generation;
    g["center"] = numbers(r.centers.back());
    g["scale"] = number(r.scales.back());
    g["lambda_star"] = number(r.lambda_star);
    g["energy"] = number(r.energy);
    if (r.degree) g["degree"] = *r.degree;
    g["k"] = r.k;
    Json cs = Json::array();
    for (const auto& c : r.centers) cs.push_back(numbers(c));
    g["centers"] = cs;
    g["scales"] = numbers(r.scales);
    g["levels"] = numbers(r.levels);
    g["targets"] = numbers(r.targets);
    g["window_energy"] = numbers(r.window_energy);
    g["omega_infinity"] = numbers(r.window.infinity);
    g["window_radius"] = number(r.window.omega.grid()->radius());
    g["quantized"] = r.quantized;
    gens.push_back(g);
  }
  doc["generations"] = gens;
  doc["E_total"] = number(res.ledger.e_total);
  doc["E_weak"] = number(res.ledger.e_weak);
  doc["defect"] = number(res.ledger.defect);
  doc["parts"] = numbers(res.ledger.parts);
  Json by_k = Json::array();
  for (const auto& [k, d] : res.ledger.defect_by_k) by_k.push_back(Json{{"k", k}, {"defect", number(d)}});
  doc["defect_by_k"] = by_k;
  doc["neck_energies"] = numbers(res.neck_energies);
  Json sep;
  Json ratio = Json::array();
  for (const auto& row : res.separation.ratio) ratio.push_back(numbers(row));
  sep["ratio"] = ratio;
  sep["pass"] = res.separation.pass;
  doc["separation_matrix"] = sep;
  Json thr;
  thr["eps0"] = number(res.thresholds.eps0);
  thr["eps_b"] = number(res.thresholds.eps_b);
  thr["eps_small"] = number(res.thresholds.eps_small);
  thr["energy_bound"] = number(res.thresholds.energy_bound);
  thr["eps_star"] = numbers(res.thresholds.eps_star);
  doc["thresholds"] = thr;
  Json pts = Json::array();
  for (const auto& p : res.points) pts.push_back(numbers(p));
  doc["concentration_points"] = pts;
  if (res.degrees) {
    Json d;
    d["deg_sequence"] = res.degrees->deg_sequence;
    d["deg_by_k"] = res.degrees->deg_by_k;
    d["deg_limit"] = res.degrees->deg_limit;
    d["deg_bubbles"] = res.degrees->deg_bubbles;
    doc["degree"] = d;
  }
  doc["incomplete"] = res.incomplete;
  doc["notes"] = res.notes;
  return doc.dump(indent);
}

void write_profile_csv(std::ostream& os, const SequenceSpec& spec, const ExtractionResult& res) {
  os << "k,t,Q\n";
  for (std::size_t i = 0; i < res.profiles.size() && i < spec.size(); ++i) {
    const ConcentrationProfile& p = res.profiles[i];
    for (std::size_t s = 0; s < p.radii.size(); ++s)
      os << spec.k[i] << ',' << format_double(p.radii[s]) << ',' << format_double(p.q[s]) << '\n';
  }
}

void write_defect_csv(std::ostream& os, const ExtractionResult& res) {
  os << "k,defect\n";
  for (const auto& [k, d] : res.ledger.defect_by_k) os << k << ',' << format_double(d) << '\n';
}

}  // namespace btlab
