#pragma once

// Text reports: `key=value` lines for machines, then an aligned table for
// people. Both render numbers with the same shortest round-trip formatting,
// so the two views never disagree.

#include <string>
#include <utility>
#include <vector>

#include "cura/training.hpp"

namespace cura {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_number(double v);

class TextTable {
public:
    explicit TextTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add_row(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
    std::string render() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Ordered metric lines present in `m` (r2, f1, accuracy, mae, mse).
std::vector<std::pair<std::string, double>> metric_lines(const Metrics& m);

/// Full training report: key=value lines then a metrics table.
std::string format_train_report(const TrainReport& report, const CuraConfig& config);

/// Evaluation output: metrics plus parameter count and efficiency.
std::string format_eval_report(const Metrics& m, std::size_t param_count);

/// The published efficiency rows checked against eta = M / P; rows whose
/// printed value matches neither truncation nor rounding are flagged.
std::string format_efficiency_table(const std::vector<EfficiencyCheck>& checks);

}  // namespace cura
