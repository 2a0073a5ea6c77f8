#include "emuval/csv.hpp"
#include "emuval/report.hpp"

#include <fstream>
#include <ostream>
#include <stdexcept>

namespace emuval::report {

Json to_json(const RngStream& stream) {
  return {{"seed", stream.seed}, {"stream", stream.stream_id}};
}

Json to_json(const TestResult& result, bool with_null_draws) {
  Json j;
  j["statistic"] = result.statistic;
  j["p_value"] = result.p_value;
  j["m_used"] = result.m_used;
  j["n0"] = result.n0;
  j["n1"] = result.n1;
  j["pi1"] = result.pi1;
  j["seed"] = to_json(result.seed);
  if (with_null_draws) j["null_draws"] = result.null_draws;
  return j;
}

Json to_json(const global::GlobalTestResult& result) {
  Json j;
  j["theta"] = result.theta;
  j["local_p"] = result.local_p;
  j["local_statistic"] = result.local_statistic;
  j["uniformity"] = global::to_string(result.uniformity);
  j["statistic"] = result.statistic;
  j["global_p"] = result.global_p;
  j["seed"] = to_json(result.seed);
  return j;
}

void write_local_pvalues_csv(std::ostream& out, const global::GlobalTestResult& result) {
  const std::size_t dim = result.theta.empty() ? 0 : result.theta.front().size();
  for (std::size_t d = 0; d < dim; ++d) out << "theta" << d << ',';
  out << "p\n";
  for (std::size_t i = 0; i < result.local_p.size(); ++i) {
    if (i < result.theta.size()) {
      for (double v : result.theta[i]) out << format_double(v) << ',';
    }
    out << format_double(result.local_p[i]) << '\n';
  }
}

void write_json(std::ostream& out, const Json& value) { out << value.dump(2) << '\n'; }

void write_json(const std::filesystem::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_json(out, value);
}

}  // namespace emuval::report
