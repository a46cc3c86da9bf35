#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace latentseq {

// Batch averages in nats per sequence. total is the minimized objective.
struct UpdateRecord {
    std::uint64_t update = 0;
    double rec = 0.0;
    double kl = 0.0;
    double aux = 0.0;
    double bwd = 0.0;
    double kl_weight = 1.0;
    double total = 0.0;
};

// iwae is NaN and k is 0 when the importance-weighted bound was not computed.
struct EvalRecord {
    std::uint64_t update = 0;
    std::string split;
    double elbo = 0.0;
    double iwae = 0.0;
    std::size_t k = 0;
};

inline constexpr std::string_view kUpdateCsvHeader = "update,rec,kl,aux,bwd,kl_weight,total";
inline constexpr std::string_view kEvalCsvHeader = "update,split,elbo,iwae,k";

// Append-only record of a training run. Update indices strictly increase;
// evaluation indices never decrease.
class MetricLog {
public:
    void add(const UpdateRecord& record);
    void add(const EvalRecord& record);

    [[nodiscard]] const std::vector<UpdateRecord>& updates() const { return updates_; }
    [[nodiscard]] const std::vector<EvalRecord>& evals() const { return evals_; }

    // Drops every record with update index >= `update`.
    void truncate(std::uint64_t update);

private:
    std::vector<UpdateRecord> updates_;
    std::vector<EvalRecord> evals_;
};

// Rows are written at %.17g so they parse back to the same doubles.
std::string csv_row(const UpdateRecord& record);
std::string csv_row(const EvalRecord& record);

void write_update_csv(std::ostream& os, const MetricLog& log);
void write_eval_csv(std::ostream& os, const MetricLog& log);

// Reads the two CSV files back; a missing file contributes no records.
MetricLog read_metric_csv(const std::filesystem::path& updates_path, const std::filesystem::path& evals_path);

}  // namespace latentseq
