// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sdm/dataset_index.hpp"

namespace sdm {

struct ScoreEntry {
    SpeciesIndex species = 0;
    double score = 0.0;

    friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

/// Sparse per-survey species scores in [0,1]. Rows are kept sorted by survey
/// id, entries by species index; zero scores are not stored.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    explicit ScoreMatrix(std::size_t num_species) : num_species_(num_species) {}

    std::size_t num_species() const { return num_species_; }
    std::size_t rows() const { return ids_.size(); }
    SurveyId survey_id(std::size_t row) const { return ids_[row]; }
    const std::vector<ScoreEntry>& row(std::size_t r) const { return rows_[r]; }
    const std::vector<SurveyId>& survey_ids() const { return ids_; }

    /// Entries for `id`, or nullptr when the survey has no row.
    const std::vector<ScoreEntry>* find(SurveyId id) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it == ids_.end() || *it != id) return nullptr;
        return &rows_[static_cast<std::size_t>(it - ids_.begin())];
    }

    double score(SurveyId id, SpeciesIndex s) const {
        const auto* r = find(id);
        if (!r) return 0.0;
        auto it = std::lower_bound(r->begin(), r->end(), s,
                                   [](const ScoreEntry& e, SpeciesIndex v) { return e.species < v; });
        return it != r->end() && it->species == s ? it->score : 0.0;
    }

    /// Adds a row. Rows may arrive in any order; ids must be unique.
    void add_row(SurveyId id, std::vector<ScoreEntry> entries) {
        for (const auto& e : entries) {
            if (!(e.score >= 0.0 && e.score <= 1.0))
                throw Error("ScoreMatrix: score " + format_double(e.score) + " outside [0,1] for survey " + std::to_string(id));
            if (e.species >= num_species_)
                throw Error("ScoreMatrix: species index out of range for survey " + std::to_string(id));
        }
        std::erase_if(entries, [](const ScoreEntry& e) { return e.score == 0.0; });
        std::sort(entries.begin(), entries.end(), [](const ScoreEntry& a, const ScoreEntry& b) { return a.species < b.species; });
        for (std::size_t i = 1; i < entries.size(); ++i)
            if (entries[i].species == entries[i - 1].species)
                throw Error("ScoreMatrix: duplicate species in row for survey " + std::to_string(id));
        auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
        if (it != ids_.end() && *it == id) throw Error("ScoreMatrix: duplicate row for survey " + std::to_string(id));
        const auto pos = it - ids_.begin();
        ids_.insert(it, id);
        rows_.insert(rows_.begin() + pos, std::move(entries));
    }

    /// Equality over stored (non-zero) entries; rows without entries are ignored.
    friend bool operator==(const ScoreMatrix& a, const ScoreMatrix& b) {
        auto non_empty = [](const ScoreMatrix& m) {
            std::vector<std::pair<SurveyId, const std::vector<ScoreEntry>*>> v;
            for (std::size_t i = 0; i < m.rows(); ++i)
                if (!m.rows_[i].empty()) v.emplace_back(m.ids_[i], &m.rows_[i]);
            return v;
        };
        const auto va = non_empty(a), vb = non_empty(b);
        if (va.size() != vb.size()) return false;
        for (std::size_t i = 0; i < va.size(); ++i)
            if (va[i].first != vb[i].first || *va[i].second != *vb[i].second) return false;
        return true;
    }

private:
    std::size_t num_species_ = 0;
    std::vector<SurveyId> ids_;
    std::vector<std::vector<ScoreEntry>> rows_;
};

/// Baseline expert: score(t, s) = (# of t's k nearest train surveys holding s) / k.
/// Train and test must share a species catalog.
inline ScoreMatrix neighbor_frequency_predict(const Dataset& train, const geo::GeoIndex& train_index, const Dataset& test,
                                              std::size_t k) {
    if (k < 1) throw Error("neighbor_frequency_predict: k must be >= 1");
    if (train.records.empty()) throw Error("neighbor_frequency_predict: training dataset is empty");
    const std::size_t S = train.catalog.size();
    std::vector<std::vector<ScoreEntry>> rows(test.records.size());
    parallel_for(test.records.size(), [&](std::size_t b, std::size_t e) {
        std::vector<std::uint32_t> counts(S, 0);
        std::vector<SpeciesIndex> touched;
        for (std::size_t i = b; i < e; ++i) {
            touched.clear();
            for (const auto& nb : train_index.knn_query(location(test.records[i]), k))
                for (SpeciesIndex s : train.records[nb.slot].species)
                    if (counts[s]++ == 0) touched.push_back(s);
            std::sort(touched.begin(), touched.end());
            auto& row = rows[i];
            row.reserve(touched.size());
            for (SpeciesIndex s : touched) {
                row.push_back({s, static_cast<double>(counts[s]) / static_cast<double>(k)});
                counts[s] = 0;
            }
        }
    }, 256);
    ScoreMatrix m(S);
    for (std::size_t i = 0; i < rows.size(); ++i) m.add_row(test.records[i].survey_id, std::move(rows[i]));
    return m;
}

inline ScoreMatrix neighbor_frequency_predict(const Dataset& train, const Dataset& test, std::size_t k) {
    return neighbor_frequency_predict(train, build_index(train), test, k);
}

/// Triplet CSV: surveyId,speciesId,score with raw species ids; absent entries are 0.
inline std::string format_scores(const ScoreMatrix& m, const SpeciesCatalog& catalog) {
    std::string out = "surveyId,speciesId,score\n";
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const std::string id = std::to_string(m.survey_id(r));
        for (const auto& e : m.row(r))
            out += id + ',' + std::to_string(catalog.raw(e.species)) + ',' + format_double(e.score) + '\n';
    }
    return out;
}

inline void save_scores(const ScoreMatrix& m, const SpeciesCatalog& catalog, const std::string& path) {
    csv::write_file(path, format_scores(m, catalog));
}

inline ScoreMatrix parse_scores_text(std::string_view text, const SpeciesCatalog& catalog,
                                     const std::string& source = "<memory>") {
    csv::LineReader reader(text);
    std::string_view line;
    std::vector<std::string_view> f;
    bool header = false;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        header = true;
        break;
    }
    if (!header) throw Error(source + ": missing header row");
    csv::split(line, f);
    int ci = -1, cs = -1, cv = -1;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const std::string n = csv::lower(f[i]);
        if (n == "surveyid") ci = static_cast<int>(i);
        else if (n == "speciesid") cs = static_cast<int>(i);
        else if (n == "score") cv = static_cast<int>(i);
    }
    if (ci < 0 || cs < 0 || cv < 0) throw Error(source + ": header must contain surveyId, speciesId, score");
    const int max_col = std::max({ci, cs, cv});

    std::map<SurveyId, std::vector<ScoreEntry>> rows;
    while (reader.next(line)) {
        if (csv::trim(line).empty()) continue;
        const std::string at = csv::where(source, reader.line_number());
        csv::split(line, f);
        if (static_cast<int>(f.size()) <= max_col) throw Error(at + "malformed row");
        SurveyId id;
        RawSpeciesId raw;
        double v;
        if (!csv::parse_int(f[ci], id)) throw Error(at + "malformed surveyId '" + std::string(f[ci]) + "'");
        if (!csv::parse_int(f[cs], raw)) throw Error(at + "malformed speciesId '" + std::string(f[cs]) + "'");
        if (!csv::parse_double(f[cv], v)) throw Error(at + "malformed score '" + std::string(f[cv]) + "'");
        if (!(v >= 0.0 && v <= 1.0))
            throw Error(at + "score " + std::string(f[cv]) + " outside [0,1] (surveyId " + std::to_string(id) +
                        ", speciesId " + std::to_string(raw) + ")");
        const auto dense = catalog.dense(raw);
        if (!dense) throw Error(at + "unknown speciesId " + std::to_string(raw));
        rows[id].push_back({*dense, v});
    }
    ScoreMatrix m(catalog.size());
    for (auto& [id, row] : rows) m.add_row(id, std::move(row));
    return m;
}

inline ScoreMatrix load_scores(const std::string& path, const SpeciesCatalog& catalog) {
    return parse_scores_text(csv::read_file(path), catalog, path);
}

}  // namespace sdm
