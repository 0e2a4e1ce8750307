#pragma once

#include <json.hpp>

#include "analysis.hpp"
#include "estimator.hpp"
#include "validation.hpp"

namespace llmfrac {

// JSON payloads for every report the library emits. Key order is the
// serializer's canonical (sorted) order, so identical inputs always
// produce identical bytes.

nlohmann::json to_json(const MixtureEstimate& estimate);
nlohmann::json to_json(const ValidationReport& report);
nlohmann::json to_json(const TrendSeries& series);
nlohmann::json to_json(const StrataResult& result);
nlohmann::json to_json(const WordShiftRanking& ranking);
nlohmann::json to_json(const WordFrequencySeries& series);

} // namespace llmfrac
