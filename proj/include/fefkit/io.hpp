#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fefkit/filter.hpp"
#include "fefkit/gain.hpp"
#include "fefkit/realize.hpp"
#include "fefkit/state_space.hpp"
#include "fefkit/varx.hpp"

namespace fefkit::io {

// ordered_json keeps field order stable so reports serialize byte-identically.
using json = nlohmann::ordered_json;

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

json to_json(const StateSpaceModel& m);
StateSpaceModel state_space_from_json(const json& j);

json to_json(const PredictorModel& m);
PredictorModel predictor_from_json(const json& j);

json to_json(const VarxModel& v);
VarxModel varx_from_json(const json& j);

json to_json(const MarkovSequence& seq);
MarkovSequence markov_from_json(const json& j);

/// Design provenance recorded next to every realization.
struct Provenance {
    int p = 0;
    int L = 0;
    int l = 0;
    int m = 0;
    int nhat = 0;
    std::string data_hash;
};

json to_json(const FefRealization& r);
FefRealization realization_from_json(const json& j);

json to_json(const GainDesign& g);
GainDesign gain_from_json(const json& j);

json to_json(const ExistenceReport& r);

/// Complete design artifact: realization + gain + existence + provenance.
struct DesignReport {
    FefRealization realization;
    GainDesign gain;
    ExistenceReport existence;
    Provenance provenance;
    Eigen::MatrixXd SigmaE;
};

json to_json(const DesignReport& d);
DesignReport design_from_json(const json& j);

/// CSV with header k,u1..u{nu},y1..y{ny}[,f1..f{nf}], 17 significant digits.
void write_timeseries_csv(const std::string& path, const TimeSeries& ts);
TimeSeries read_timeseries_csv(const std::string& path);

/// CSV with header k,fhat1..,rtilde1..,flag.
void write_estimates_csv(const std::string& path,
                         const std::vector<EstimateRecord>& records,
                         bool diverged = false,
                         Eigen::Index diverged_at = -1);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// FNV-1a over the raw samples, for design provenance.
std::string hash_timeseries(const TimeSeries& ts);

std::string format_double(double v);

}  // namespace fefkit::io
