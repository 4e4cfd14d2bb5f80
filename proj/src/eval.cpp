#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cohortsieve {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
    tp += other.tp;
    fp += other.fp;
    tn += other.tn;
    fn += other.fn;
    return *this;
}

double safe_ratio(long numerator, long denominator) {
    return denominator == 0 ? 0.0 : static_cast<double>(numerator) / denominator;
}

double harmonic_f1(double precision, double recall) {
    double sum = precision + recall;
    return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

ClassMetrics class_metrics(const ConfusionCounts& counts, Label positive) {
    ConfusionCounts c = counts;
    if (positive == Label::not_met) {
        c = ConfusionCounts{counts.tn, counts.fn, counts.tp, counts.fp};
    }
    ClassMetrics m;
    m.precision = safe_ratio(c.tp, c.tp + c.fp);
    m.recall = safe_ratio(c.tp, c.tp + c.fn);
    m.specificity = safe_ratio(c.tn, c.tn + c.fp);
    m.f1 = harmonic_f1(m.precision, m.recall);
    return m;
}

CriterionReport criterion_report(std::string criterion_id, const ConfusionCounts& counts) {
    return report_from_class_metrics(std::move(criterion_id),
                                     class_metrics(counts, Label::met),
                                     class_metrics(counts, Label::not_met));
}

CriterionReport report_from_class_metrics(std::string criterion_id, const ClassMetrics& met,
                                          const ClassMetrics& not_met) {
    CriterionReport report;
    report.criterion_id = std::move(criterion_id);
    report.met = met;
    report.not_met = not_met;
    report.overall_f = (met.f1 + not_met.f1) / 2.0;
    report.auc = (met.recall + met.specificity) / 2.0;
    return report;
}

ConfusionCounts confusion(const std::map<std::string, Label>& gold,
                          const std::map<std::string, Label>& predictions,
                          std::string_view criterion_id) {
    ConfusionCounts counts;
    for (const auto& [patient, truth] : gold) {
        auto it = predictions.find(patient);
        if (it == predictions.end()) {
            raise_data("missing prediction for patient " + patient + ", criterion " +
                       std::string(criterion_id));
        }
        Label predicted = it->second;
        if (truth == Label::met) {
            (predicted == Label::met ? counts.tp : counts.fn) += 1;
        } else {
            (predicted == Label::met ? counts.fp : counts.tn) += 1;
        }
    }
    return counts;
}

AggregateReport aggregate(const std::vector<std::pair<std::string, ConfusionCounts>>& counts) {
    if (counts.empty()) raise_data("aggregate() needs at least one criterion");

    AggregateReport report;
    ConfusionCounts pooled;
    for (const auto& [criterion_id, c] : counts) {
        report.per_criterion.push_back(criterion_report(criterion_id, c));
        pooled += c;
    }
    report.micro = criterion_report("micro", pooled);

    const double n = static_cast<double>(report.per_criterion.size());
    CriterionReport macro;
    macro.criterion_id = "macro";
    for (const auto& r : report.per_criterion) {
        macro.met.precision += r.met.precision / n;
        macro.met.recall += r.met.recall / n;
        macro.met.specificity += r.met.specificity / n;
        macro.met.f1 += r.met.f1 / n;
        macro.not_met.precision += r.not_met.precision / n;
        macro.not_met.recall += r.not_met.recall / n;
        macro.not_met.specificity += r.not_met.specificity / n;
        macro.not_met.f1 += r.not_met.f1 / n;
        macro.overall_f += r.overall_f / n;
        macro.auc += r.auc / n;
    }
    report.macro = macro;
    return report;
}

std::string format_metric(double value) {
    double rounded = static_cast<double>(std::llround(value * 10000.0)) / 10000.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", rounded);
    return buf;
}

namespace {

std::vector<double> row_values(const CriterionReport& r) {
    return {r.met.precision,     r.met.recall,     r.met.specificity,
            r.met.f1,            r.not_met.precision, r.not_met.recall,
            r.not_met.f1,        r.overall_f,      r.auc};
}

void append_tsv_row(std::string& out, std::string_view name, const CriterionReport& r) {
    out += name;
    for (double v : row_values(r)) {
        out += '\t';
        out += format_metric(v);
    }
    out += '\n';
}

void append_table_row(std::string& out, std::string_view name, const CriterionReport& r) {
    char buf[256];
    auto v = row_values(r);
    std::snprintf(buf, sizeof(buf),
                  "%-17s %8s %8s %8s %8s   %8s %8s %8s   %8s %8s\n",
                  std::string(name).c_str(), format_metric(v[0]).c_str(),
                  format_metric(v[1]).c_str(), format_metric(v[2]).c_str(),
                  format_metric(v[3]).c_str(), format_metric(v[4]).c_str(),
                  format_metric(v[5]).c_str(), format_metric(v[6]).c_str(),
                  format_metric(v[7]).c_str(), format_metric(v[8]).c_str());
    out += buf;
}

}  // namespace

std::string render_report(const AggregateReport& report) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-17s %8s %8s %8s %8s   %8s %8s %8s   %8s %8s\n",
                  "criterion", "p_met", "r_met", "spec", "f_met", "p_notmet", "r_notmet",
                  "f_notmet", "overall_f", "auc");
    out += buf;
    for (const auto& r : report.per_criterion) {
        append_table_row(out, r.criterion_id, r);
    }
    append_table_row(out, "Overall (micro)", report.micro);
    append_table_row(out, "Overall (macro)", report.macro);
    return out;
}

std::string report_to_tsv(const AggregateReport& report) {
    std::string out = "criterion";
    for (std::string_view column : kReportColumns) {
        out += '\t';
        out += column;
    }
    out += '\n';
    for (const auto& r : report.per_criterion) {
        append_tsv_row(out, r.criterion_id, r);
    }
    append_tsv_row(out, "micro", report.micro);
    append_tsv_row(out, "macro", report.macro);
    return out;
}

std::vector<TsvRow> parse_report_tsv(std::string_view tsv_text) {
    std::vector<TsvRow> rows;
    std::size_t pos = 0;
    bool header = true;
    while (pos < tsv_text.size()) {
        std::size_t end = tsv_text.find('\n', pos);
        if (end == std::string_view::npos) end = tsv_text.size();
        std::string_view line = tsv_text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        auto fields = split(line, '\t');
        if (header) {
            header = false;
            if (fields.size() != kReportColumns.size() + 1 || fields[0] != "criterion") {
                raise_data("unrecognized report TSV header");
            }
            continue;
        }
        if (fields.size() != kReportColumns.size() + 1) {
            raise_data("report TSV row with wrong column count: " + std::string(line));
        }
        TsvRow row;
        row.criterion_id = fields[0];
        for (std::size_t i = 1; i < fields.size(); ++i) {
            try {
                row.values.push_back(std::stod(fields[i]));
            } catch (const std::exception&) {
                raise_data("bad numeric field '" + fields[i] + "' in report TSV");
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) raise_data("report TSV carries no rows");
    return rows;
}

}  // namespace cohortsieve
