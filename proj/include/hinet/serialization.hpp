#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <json.hpp>

#include "hinet/dgp.hpp"
#include "hinet/metrics.hpp"
#include "hinet/model.hpp"
#include "hinet/train.hpp"
#include "hinet/tuning.hpp"

namespace hinet {

using Json = nlohmann::ordered_json;

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

Json to_json(const DgpParams& params);
DgpParams dgp_params_from_json(const Json& j);
Json to_json(const GraphSettings& settings);
GraphSettings graph_settings_from_json(const Json& j);
Json to_json(const HiNetConfig& config);
HiNetConfig hinet_config_from_json(const Json& j);
Json to_json(const HyperparameterGrid& grid);
HyperparameterGrid grid_from_json(const Json& j);
Json to_json(const WeightBank& bank);
WeightBank weight_bank_from_json(const Json& j);

Json to_json(const Dataset& dataset);
/// Parses and validates a dataset document (shapes, binary treatments,
/// transformed features consistent with the raw features).
Dataset dataset_from_json(const Json& j);

Json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const Json& j);
/// Per-rate breakdown: j,p_j,mse_pehne_j,mse_cnee_j.
std::string per_rate_csv(const MetricReport& report);

Json to_json(const TuningResult& result);
/// One row per grid point, then one per alpha of the sweep:
/// stage,hidden_size,epochs,learning_rate,dropout,alpha,validation_loss.
/// Diverged runs leave validation_loss empty.
std::string loss_table_csv(const TuningResult& result);
std::string history_csv(const std::vector<EpochRecord>& history);

Json checkpoint_to_json(Model& model);
std::unique_ptr<Model> checkpoint_from_json(const Json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
/// Writes `j.dump(2)` followed by a newline.
void write_json_file(const std::filesystem::path& path, const Json& j);

}  // namespace hinet
