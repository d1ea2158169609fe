#include "fefkit/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace fefkit::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    j["data"] = std::move(data);
    return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw Error("matrix_from_json: data length mismatch");
    Eigen::MatrixXd m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
    return m;
}

json to_json(const StateSpaceModel& m) {
    json j;
    j["type"] = "state_space";
    j["dt"] = m.dt;
    j["A"] = matrix_to_json(m.A);
    j["B"] = matrix_to_json(m.B);
    j["C"] = matrix_to_json(m.C);
    j["D"] = matrix_to_json(m.D);
    j["E"] = matrix_to_json(m.E);
    j["G"] = matrix_to_json(m.G);
    j["Q1"] = matrix_to_json(m.Q1);
    j["Q2"] = matrix_to_json(m.Q2);
    return j;
}

StateSpaceModel state_space_from_json(const json& j) {
    StateSpaceModel m;
    m.dt = j.at("dt").get<double>();
    m.A = matrix_from_json(j.at("A"));
    m.B = matrix_from_json(j.at("B"));
    m.C = matrix_from_json(j.at("C"));
    m.D = matrix_from_json(j.at("D"));
    m.E = matrix_from_json(j.at("E"));
    m.G = matrix_from_json(j.at("G"));
    m.Q1 = matrix_from_json(j.at("Q1"));
    m.Q2 = matrix_from_json(j.at("Q2"));
    return m;
}

json to_json(const PredictorModel& m) {
    json j;
    j["type"] = "predictor";
    j["Phi"] = matrix_to_json(m.Phi);
    j["Btilde"] = matrix_to_json(m.Btilde);
    j["Etilde"] = matrix_to_json(m.Etilde);
    j["K"] = matrix_to_json(m.K);
    j["C"] = matrix_to_json(m.C);
    j["D"] = matrix_to_json(m.D);
    j["G"] = matrix_to_json(m.G);
    j["SigmaE"] = matrix_to_json(m.SigmaE);
    return j;
}

PredictorModel predictor_from_json(const json& j) {
    PredictorModel m;
    m.Phi = matrix_from_json(j.at("Phi"));
    m.Btilde = matrix_from_json(j.at("Btilde"));
    m.Etilde = matrix_from_json(j.at("Etilde"));
    m.K = matrix_from_json(j.at("K"));
    m.C = matrix_from_json(j.at("C"));
    m.D = matrix_from_json(j.at("D"));
    m.G = matrix_from_json(j.at("G"));
    m.SigmaE = matrix_from_json(j.at("SigmaE"));
    return m;
}

json to_json(const VarxModel& v) {
    json j;
    j["type"] = "varx";
    j["p"] = v.p;
    json my = json::array();
    for (const auto& m : v.My) my.push_back(matrix_to_json(m));
    j["My"] = std::move(my);
    json mu = json::array();
    for (const auto& m : v.Mu) mu.push_back(matrix_to_json(m));
    j["Mu"] = std::move(mu);
    j["SigmaE"] = matrix_to_json(v.SigmaE);
    return j;
}

VarxModel varx_from_json(const json& j) {
    VarxModel v;
    v.p = j.at("p").get<int>();
    for (const auto& m : j.at("My")) v.My.push_back(matrix_from_json(m));
    for (const auto& m : j.at("Mu")) v.Mu.push_back(matrix_from_json(m));
    v.SigmaE = matrix_from_json(j.at("SigmaE"));
    if (static_cast<int>(v.My.size()) != v.p ||
        static_cast<int>(v.Mu.size()) != v.p + 1)
        throw Error("varx_from_json: coefficient list lengths do not match order");
    return v;
}

json to_json(const MarkovSequence& seq) {
    json j;
    j["rows"] = seq.rows();
    j["cols"] = seq.cols();
    json blocks = json::array();
    for (Eigen::Index i = 0; i < seq.size(); ++i)
        blocks.push_back(matrix_to_json(seq[i]));
    j["blocks"] = std::move(blocks);
    return j;
}

MarkovSequence markov_from_json(const json& j) {
    MarkovSequence seq(j.at("rows").get<Eigen::Index>(),
                       j.at("cols").get<Eigen::Index>());
    for (const auto& b : j.at("blocks")) seq.push_back(matrix_from_json(b));
    return seq;
}

json to_json(const FefRealization& r) {
    json j;
    j["tau"] = r.tau;
    j["nu"] = r.nu;
    j["ny"] = r.ny;
    j["Phi1"] = matrix_to_json(r.Phi1);
    j["BfKf"] = matrix_to_json(r.BfKf);
    j["C1"] = matrix_to_json(r.C1);
    j["C2"] = matrix_to_json(r.C2);
    j["B1"] = matrix_to_json(r.B1);
    j["D2"] = matrix_to_json(r.D2);
    j["Df1Gf1"] = matrix_to_json(r.Df1Gf1);
    j["Df2Gf2"] = matrix_to_json(r.Df2Gf2);
    j["Pi"] = matrix_to_json(r.Pi);
    return j;
}

FefRealization realization_from_json(const json& j) {
    FefRealization r;
    r.tau = j.at("tau").get<Eigen::Index>();
    r.nu = j.at("nu").get<Eigen::Index>();
    r.ny = j.at("ny").get<Eigen::Index>();
    r.Phi1 = matrix_from_json(j.at("Phi1"));
    r.BfKf = matrix_from_json(j.at("BfKf"));
    r.C1 = matrix_from_json(j.at("C1"));
    r.C2 = matrix_from_json(j.at("C2"));
    r.B1 = matrix_from_json(j.at("B1"));
    r.D2 = matrix_from_json(j.at("D2"));
    r.Df1Gf1 = matrix_from_json(j.at("Df1Gf1"));
    r.Df2Gf2 = matrix_from_json(j.at("Df2Gf2"));
    r.Pi = matrix_from_json(j.at("Pi"));
    return r;
}

json to_json(const GainDesign& g) {
    json j;
    j["alpha"] = matrix_to_json(g.alpha);
    j["P"] = matrix_to_json(g.P);
    j["Kbar"] = matrix_to_json(g.Kbar);
    j["Kr"] = matrix_to_json(g.Kr);
    j["XiE"] = matrix_to_json(g.XiE);
    j["are_residual"] = g.are_residual;
    j["closed_loop_radius"] = g.closed_loop_radius;
    j["iterations"] = g.iterations;
    j["degenerate"] = g.degenerate;
    j["open_loop"] = g.open_loop;
    return j;
}

GainDesign gain_from_json(const json& j) {
    GainDesign g;
    g.alpha = matrix_from_json(j.at("alpha"));
    g.P = matrix_from_json(j.at("P"));
    g.Kbar = matrix_from_json(j.at("Kbar"));
    g.Kr = matrix_from_json(j.at("Kr"));
    g.XiE = matrix_from_json(j.at("XiE"));
    g.are_residual = j.at("are_residual").get<double>();
    g.closed_loop_radius = j.at("closed_loop_radius").get<double>();
    g.iterations = j.at("iterations").get<int>();
    g.degenerate = j.at("degenerate").get<bool>();
    g.open_loop = j.at("open_loop").get<bool>();
    return g;
}

json to_json(const ExistenceReport& r) {
    json j;
    json det = json::array();
    for (const auto& s : r.detectability) {
        json e;
        e["lambda_re"] = s.lambda.real();
        e["lambda_im"] = s.lambda.imag();
        e["sigma_min"] = s.sigma_min;
        e["normalized"] = s.normalized;
        det.push_back(std::move(e));
    }
    j["detectability"] = std::move(det);
    j["detectability_margin"] = r.detectability_margin;
    j["no_unstable_modes"] = r.no_unstable_modes;
    j["controllability_margin"] = r.controllability_margin;
    j["worst_omega"] = r.worst_omega;
    return j;
}

json to_json(const DesignReport& d) {
    json j;
    j["type"] = "fef_design";
    j["realization"] = to_json(d.realization);
    j["gain"] = to_json(d.gain);
    j["existence"] = to_json(d.existence);
    json prov;
    prov["p"] = d.provenance.p;
    prov["L"] = d.provenance.L;
    prov["l"] = d.provenance.l;
    prov["m"] = d.provenance.m;
    prov["nhat"] = d.provenance.nhat;
    prov["data_hash"] = d.provenance.data_hash;
    j["provenance"] = std::move(prov);
    j["SigmaE"] = matrix_to_json(d.SigmaE);
    return j;
}

DesignReport design_from_json(const json& j) {
    DesignReport d;
    d.realization = realization_from_json(j.at("realization"));
    d.gain = gain_from_json(j.at("gain"));
    const auto& prov = j.at("provenance");
    d.provenance.p = prov.at("p").get<int>();
    d.provenance.L = prov.at("L").get<int>();
    d.provenance.l = prov.at("l").get<int>();
    d.provenance.m = prov.at("m").get<int>();
    d.provenance.nhat = prov.at("nhat").get<int>();
    d.provenance.data_hash = prov.at("data_hash").get<std::string>();
    d.SigmaE = matrix_from_json(j.at("SigmaE"));
    // existence report is informational; not parsed back
    return d;
}

void write_timeseries_csv(const std::string& path, const TimeSeries& ts) {
    std::ofstream out(path);
    if (!out) throw Error("write_timeseries_csv: cannot open " + path);
    out << "k";
    for (Eigen::Index i = 0; i < ts.u.cols(); ++i) out << ",u" << (i + 1);
    for (Eigen::Index i = 0; i < ts.y.cols(); ++i) out << ",y" << (i + 1);
    for (Eigen::Index i = 0; i < ts.f.cols() && ts.has_fault(); ++i)
        out << ",f" << (i + 1);
    out << "\n";
    for (Eigen::Index k = 0; k < ts.samples(); ++k) {
        out << k;
        for (Eigen::Index i = 0; i < ts.u.cols(); ++i)
            out << "," << format_double(ts.u(k, i));
        for (Eigen::Index i = 0; i < ts.y.cols(); ++i)
            out << "," << format_double(ts.y(k, i));
        if (ts.has_fault())
            for (Eigen::Index i = 0; i < ts.f.cols(); ++i)
                out << "," << format_double(ts.f(k, i));
        out << "\n";
    }
}

TimeSeries read_timeseries_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("read_timeseries_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw Error("read_timeseries_csv: empty file " + path);

    Eigen::Index nu = 0, ny = 0, nf = 0;
    {
        std::stringstream header(line);
        std::string col;
        while (std::getline(header, col, ',')) {
            if (col.starts_with("u")) ++nu;
            else if (col.starts_with("y")) ++ny;
            else if (col.starts_with("f")) ++nf;
        }
    }
    if (nu == 0 || ny == 0)
        throw Error("read_timeseries_csv: header must contain u and y columns");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<Eigen::Index>(row.size()) != 1 + nu + ny + nf)
            throw Error("read_timeseries_csv: row width mismatch");
        rows.push_back(std::move(row));
    }

    TimeSeries ts;
    const Eigen::Index N = static_cast<Eigen::Index>(rows.size());
    ts.u.resize(N, nu);
    ts.y.resize(N, ny);
    ts.f.resize(nf > 0 ? N : 0, nf);
    for (Eigen::Index k = 0; k < N; ++k) {
        for (Eigen::Index i = 0; i < nu; ++i) ts.u(k, i) = rows[k][1 + i];
        for (Eigen::Index i = 0; i < ny; ++i) ts.y(k, i) = rows[k][1 + nu + i];
        for (Eigen::Index i = 0; i < nf; ++i) ts.f(k, i) = rows[k][1 + nu + ny + i];
    }
    return ts;
}

void write_estimates_csv(const std::string& path,
                         const std::vector<EstimateRecord>& records,
                         bool diverged, Eigen::Index diverged_at) {
    std::ofstream out(path);
    if (!out) throw Error("write_estimates_csv: cannot open " + path);
    const Eigen::Index nf = records.empty() ? 0 : records.front().fhat.size();
    const Eigen::Index ny = records.empty() ? 0 : records.front().rtilde.size();
    out << "k";
    for (Eigen::Index i = 0; i < nf; ++i) out << ",fhat" << (i + 1);
    for (Eigen::Index i = 0; i < ny; ++i) out << ",rtilde" << (i + 1);
    out << ",flag\n";
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        out << rec.k;
        for (Eigen::Index i = 0; i < nf; ++i)
            out << "," << format_double(rec.fhat(i));
        for (Eigen::Index i = 0; i < ny; ++i)
            out << "," << format_double(rec.rtilde(i));
        const bool last = r + 1 == records.size();
        out << "," << (diverged && last ? "diverged"
                                        : (rec.transient ? "transient" : "ok"))
            << "\n";
    }
    if (diverged && records.empty())
        out << diverged_at << ",diverged\n";
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("read_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_file: cannot open " + path);
    out << content;
}

std::string hash_timeseries(const TimeSeries& ts) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const Eigen::MatrixXd& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double v = m(r, c);
                const unsigned char* bytes =
                    reinterpret_cast<const unsigned char*>(&v);
                for (std::size_t b = 0; b < sizeof(double); ++b) {
                    h ^= bytes[b];
                    h *= 0x100000001b3ULL;
                }
            }
    };
    mix(ts.u);
    mix(ts.y);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace fefkit::io
