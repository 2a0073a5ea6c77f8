#pragma once

#include "emuval/globaltest.hpp"
#include "emuval/sample.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>

namespace emuval::report {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

Json to_json(const RngStream& stream);
/// statistic, p_value, m_used, n0, n1, pi1, seed; null_draws on request.
Json to_json(const TestResult& result, bool with_null_draws = false);
/// theta, local_p, local_statistic, uniformity, statistic, global_p, seed.
Json to_json(const global::GlobalTestResult& result);

/// One row per local test: theta0..theta{d-1}, p.
void write_local_pvalues_csv(std::ostream& out, const global::GlobalTestResult& result);

/// Two-space indented JSON plus a trailing newline.
void write_json(std::ostream& out, const Json& value);
void write_json(const std::filesystem::path& path, const Json& value);

}  // namespace emuval::report
