#pragma once

#include <string>

#include <json.hpp>

#include "dift/service/config.hpp"

namespace dift {

// JSON renderings carry no timestamps or host details, so identical runs
// produce identical bytes. Tables report percentages with one decimal.

nlohmann::json extraction_json(const ExtractionConfig& cfg);
nlohmann::json propagation_json(const PropagationConfig& cfg);
nlohmann::json preset_json(const Preset& preset);

/// "%g" rendering used for threshold-keyed maps.
std::string number_key(double v);

nlohmann::json pck_report_json(const PckReport& report);
std::string pck_table(const PckReport& report);

nlohmann::json grid_search_json(const GridSearchResult& result);
std::string grid_search_table(const GridSearchResult& result);

nlohmann::json cub_report_json(const CubReport& report);
std::string cub_table(const CubReport& report);

nlohmann::json hpatches_report_json(const HPatchesReport& report);
std::string hpatches_table(const HPatchesReport& report);

nlohmann::json davis_report_json(const DavisReport& report);
std::string davis_table(const DavisReport& report);

nlohmann::json jhmdb_report_json(const JhmdbReport& report);
std::string jhmdb_table(const JhmdbReport& report);

}  // namespace dift
