#include "latentseq/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "latentseq/errors.hpp"

namespace latentseq {

void MetricLog::add(const UpdateRecord& record) {
    if (!updates_.empty() && record.update <= updates_.back().update) {
        throw std::invalid_argument("MetricLog: update index " + std::to_string(record.update) +
                                    " does not follow " + std::to_string(updates_.back().update));
    }
    updates_.push_back(record);
}

void MetricLog::add(const EvalRecord& record) {
    if (!evals_.empty() && record.update < evals_.back().update) {
        throw std::invalid_argument("MetricLog: evaluation index " + std::to_string(record.update) + " goes backwards");
    }
    evals_.push_back(record);
}

void MetricLog::truncate(std::uint64_t update) {
    std::erase_if(updates_, [&](const UpdateRecord& r) { return r.update >= update; });
    std::erase_if(evals_, [&](const EvalRecord& r) { return r.update >= update; });
}

namespace {

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double to_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("metric CSV: cannot parse '" + s + "' as a number");
}

std::uint64_t to_u64(const std::string& s) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw DataError("metric CSV: cannot parse '" + s + "' as an index");
}

}  // namespace

std::string csv_row(const UpdateRecord& r) {
    return std::to_string(r.update) + "," + g17(r.rec) + "," + g17(r.kl) + "," + g17(r.aux) + "," + g17(r.bwd) + "," +
           g17(r.kl_weight) + "," + g17(r.total);
}

std::string csv_row(const EvalRecord& r) {
    return std::to_string(r.update) + "," + r.split + "," + g17(r.elbo) + "," + g17(r.iwae) + "," +
           std::to_string(r.k);
}

void write_update_csv(std::ostream& os, const MetricLog& log) {
    os << kUpdateCsvHeader << '\n';
    for (const auto& r : log.updates()) os << csv_row(r) << '\n';
}

void write_eval_csv(std::ostream& os, const MetricLog& log) {
    os << kEvalCsvHeader << '\n';
    for (const auto& r : log.evals()) os << csv_row(r) << '\n';
}

MetricLog read_metric_csv(const std::filesystem::path& updates_path, const std::filesystem::path& evals_path) {
    MetricLog log;
    auto read_rows = [](const std::filesystem::path& path, std::string_view header, std::size_t columns, auto&& add) {
        std::ifstream is(path);
        if (!is) return;
        std::string line;
        if (!std::getline(is, line) || line != header) {
            throw DataError("metric CSV " + path.string() + ": unexpected header");
        }
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto cells = split_csv(line);
            if (cells.size() != columns) throw DataError("metric CSV " + path.string() + ": malformed row '" + line + "'");
            add(cells);
        }
    };
    read_rows(updates_path, kUpdateCsvHeader, 7, [&](const std::vector<std::string>& c) {
        log.add(UpdateRecord{to_u64(c[0]), to_double(c[1]), to_double(c[2]), to_double(c[3]), to_double(c[4]),
                             to_double(c[5]), to_double(c[6])});
    });
    read_rows(evals_path, kEvalCsvHeader, 5, [&](const std::vector<std::string>& c) {
        log.add(EvalRecord{to_u64(c[0]), c[1], to_double(c[2]), to_double(c[3]), static_cast<std::size_t>(to_u64(c[4]))});
    });
    return log;
}

}  // namespace latentseq
