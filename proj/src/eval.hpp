#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "criteria.hpp"

namespace cohortsieve {

// Confusion counts with "met" as the positive class.
struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& other);
    long total() const { return tp + fp + tn + fn; }
};

struct ClassMetrics {
    double precision = 0;
    double recall = 0;
    double specificity = 0;
    double f1 = 0;
};

// 0/0 ratios evaluate to 0 throughout (challenge convention).
double safe_ratio(long numerator, long denominator);
double harmonic_f1(double precision, double recall);
ClassMetrics class_metrics(const ConfusionCounts& counts, Label positive);

struct CriterionReport {
    std::string criterion_id;
    ClassMetrics met;
    ClassMetrics not_met;
    double overall_f = 0;  // mean of the two class F1s
    double auc = 0;        // (met recall + specificity) / 2
};

CriterionReport criterion_report(std::string criterion_id, const ConfusionCounts& counts);
// Recomputes the aggregate fields from per-class metrics taken as given.
CriterionReport report_from_class_metrics(std::string criterion_id, const ClassMetrics& met,
                                          const ClassMetrics& not_met);

struct AggregateReport {
    std::vector<CriterionReport> per_criterion;
    CriterionReport micro;  // metrics over pooled counts
    CriterionReport macro;  // unweighted column means over criteria
};

// Tallies one criterion. Every gold patient must have a prediction; extra
// predictions are ignored.
ConfusionCounts confusion(const std::map<std::string, Label>& gold,
                          const std::map<std::string, Label>& predictions,
                          std::string_view criterion_id);

AggregateReport aggregate(const std::vector<std::pair<std::string, ConfusionCounts>>& counts);

// Values in both renderings are rounded half-up to 4 decimals.
std::string render_report(const AggregateReport& report);
std::string report_to_tsv(const AggregateReport& report);

std::string format_metric(double value);  // "0.7126"

struct TsvRow {
    std::string criterion_id;
    std::vector<double> values;  // column order of report_to_tsv
};
std::vector<TsvRow> parse_report_tsv(std::string_view tsv_text);

inline constexpr std::array<std::string_view, 9> kReportColumns = {
    "p_met", "r_met", "spec", "f_met", "p_notmet",
    "r_notmet", "f_notmet", "overall_f", "auc"};

}  // namespace cohortsieve
