#include "stlcbf/artifacts.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stlcbf {

namespace {

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    return out;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

void require_rows(const Trajectory& traj)
{
    if (traj.empty())
        throw std::invalid_argument("empty trajectory");
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const BfTree& tree, const std::string& path)
{
    require_rows(traj);
    auto out = open_out(path);
    const Eigen::Index n = traj.x.front().size();
    const Eigen::Index m = traj.u.front().size();
    out << "t";
    for (Eigen::Index i = 0; i < n; ++i)
        out << ",x" << i;
    for (Eigen::Index i = 0; i < m; ++i)
        out << ",u" << i;
    out << ",b0,chosen_k\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << format_number(traj.t[k]);
        for (Eigen::Index i = 0; i < n; ++i)
            out << ',' << format_number(traj.x[k](i));
        for (Eigen::Index i = 0; i < m; ++i)
            out << ',' << format_number(traj.u[k](i));
        out << ',' << format_number(traj.b0[k]) << ',';
        if (traj.chosen[k])
            out << tree.node(*traj.chosen[k]).label;
        out << '\n';
    }
}

void write_barrier_csv(const Trajectory& traj, const std::string& path)
{
    require_rows(traj);
    auto out = open_out(path);
    out << "t,b0\n";
    for (std::size_t k = 0; k < traj.size(); ++k)
        out << format_number(traj.t[k]) << ',' << format_number(traj.b0[k]) << '\n';
}

void write_inputs_csv(const Trajectory& traj, const std::string& path)
{
    require_rows(traj);
    auto out = open_out(path);
    const Eigen::Index m = traj.u.front().size();
    out << "t";
    for (Eigen::Index i = 0; i < m; ++i)
        out << ",u" << i;
    out << '\n';
    for (std::size_t k = 0; k < traj.size(); ++k) {
        out << format_number(traj.t[k]);
        for (Eigen::Index i = 0; i < m; ++i)
            out << ',' << format_number(traj.u[k](i));
        out << '\n';
    }
}

Trajectory read_trajectory_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + " is empty");
    const auto header = split(line);
    std::vector<std::size_t> xs, us;
    std::size_t tcol = header.size(), bcol = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h == "t")
            tcol = c;
        else if (h == "b0")
            bcol = c;
        else if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1])))
            xs.push_back(c);
        else if (h.size() > 1 && h[0] == 'u' && std::isdigit(static_cast<unsigned char>(h[1])))
            us.push_back(c);
    }
    if (tcol == header.size() || xs.empty())
        throw std::runtime_error(path + " needs a t column and x0.. columns");

    Trajectory tr;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ":" + std::to_string(row) + ": expected " +
                                     std::to_string(header.size()) + " cells");
        auto num = [&](std::size_t c) {
            try {
                return std::stod(cells[c]);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(row) + ": bad number \"" + cells[c] + "\"");
            }
        };
        tr.t.push_back(num(tcol));
        Eigen::VectorXd x(static_cast<Eigen::Index>(xs.size()));
        for (std::size_t i = 0; i < xs.size(); ++i)
            x(static_cast<Eigen::Index>(i)) = num(xs[i]);
        Eigen::VectorXd u(static_cast<Eigen::Index>(us.size()));
        for (std::size_t i = 0; i < us.size(); ++i)
            u(static_cast<Eigen::Index>(i)) = num(us[i]);
        tr.x.push_back(x);
        tr.u.push_back(u);
        tr.b0.push_back(bcol < header.size() ? num(bcol) : 0.0);
        tr.chosen.emplace_back();
        if (tr.t.size() > 1 && !(tr.t.back() > tr.t[tr.t.size() - 2]))
            throw std::runtime_error(path + ":" + std::to_string(row) + ": times must increase strictly");
    }
    if (tr.empty())
        throw std::runtime_error(path + " has no samples");
    return tr;
}

void write_svg_plot(const std::vector<Series>& series, const PlotSpec& spec, const std::string& path)
{
    double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("series " + s.name + " has mismatched x/y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0))
        throw std::invalid_argument("nothing to plot");
    if (spec.zero_line) {
        y0 = std::min(y0, 0.0);
        y1 = std::max(y1, 0.0);
    }
    if (x1 - x0 <= 0.0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if (y1 - y0 <= 0.0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    const double W = 640, H = 420, L = 70, R = 150, T = 40, B = 50;
    double sx = (W - L - R) / (x1 - x0);
    double sy = (H - T - B) / (y1 - y0);
    if (spec.equal_aspect) {
        const double s = std::min(sx, sy);
        sx = sy = s;
    }
    auto px = [&](double x) { return L + (x - x0) * sx; };
    auto py = [&](double y) { return H - B - (y - y0) * sy; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};
    auto out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << spec.title
        << "</text>\n";
    out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << (x1 - x0) * sx << "\" height=\""
        << (y1 - y0) * sy << "\" fill=\"none\" stroke=\"black\"/>\n";
    auto label = [&](double x, double y, const std::string& s, const char* anchor) {
        out << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"11\" text-anchor=\"" << anchor << "\">" << s
            << "</text>\n";
    };
    label(L, py(y0) + 16, format_number(x0), "start");
    label(px(x1), py(y0) + 16, format_number(x1), "end");
    label(L - 4, py(y0), format_number(y0), "end");
    label(L - 4, py(y1) + 10, format_number(y1), "end");
    label((L + px(x1)) / 2, H - 12, spec.x_label, "middle");
    out << "<text x=\"16\" y=\"" << (T + py(y0)) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
        << (T + py(y0)) / 2 << ")\" text-anchor=\"middle\">" << spec.y_label << "</text>\n";
    if (spec.zero_line)
        out << "<line x1=\"" << L << "\" y1=\"" << py(0) << "\" x2=\"" << px(x1) << "\" y2=\"" << py(0)
            << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = colors[s % 9];
        out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            out << format_number(std::round(px(series[s].x[i]) * 100) / 100) << ','
                << format_number(std::round(py(series[s].y[i]) * 100) / 100) << ' ';
        out << "\"/>\n";
        const double ly = T + 14 + 16.0 * static_cast<double>(s);
        out << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 32 << "\" y2=\""
            << ly - 4 << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        label(W - R + 36, ly, series[s].name, "start");
    }
    out << "</svg>\n";
}

std::vector<std::string> emit_plots(const Trajectory& traj, const std::string& dir, std::size_t agents)
{
    require_rows(traj);
    std::filesystem::create_directories(dir);
    const auto n = traj.x.front().size();
    std::vector<Series> paths;
    PlotSpec pspec{"paths", "x", "y", true, false};
    if (agents > 0) {
        for (std::size_t a = 0; a < agents; ++a) {
            Series s{"agent " + std::to_string(a + 1), {}, {}};
            for (const auto& x : traj.x) {
                s.x.push_back(x(static_cast<Eigen::Index>(3 * a)));
                s.y.push_back(x(static_cast<Eigen::Index>(3 * a + 1)));
            }
            paths.push_back(std::move(s));
        }
    } else if (n >= 2) {
        Series s{"x", {}, {}};
        for (const auto& x : traj.x) {
            s.x.push_back(x(0));
            s.y.push_back(x(1));
        }
        paths.push_back(std::move(s));
    } else {
        Series s{"x", traj.t, {}};
        for (const auto& x : traj.x)
            s.y.push_back(x(0));
        paths.push_back(std::move(s));
        pspec = PlotSpec{"state", "t", "x", false, false};
    }
    const std::string p1 = dir + "/paths.svg";
    write_svg_plot(paths, pspec, p1);

    const std::string p2 = dir + "/barrier.svg";
    write_svg_plot({Series{"b0", traj.t, traj.b0}}, PlotSpec{"barrier b0", "t", "b0", false, true}, p2);

    std::vector<Series> inputs;
    const auto m = traj.u.front().size();
    for (Eigen::Index i = 0; i < m; ++i) {
        Series s{"u" + std::to_string(i), traj.t, {}};
        for (const auto& u : traj.u)
            s.y.push_back(u(i));
        inputs.push_back(std::move(s));
    }
    const std::string p3 = dir + "/inputs.svg";
    write_svg_plot(inputs, PlotSpec{"inputs", "t", "u", false, false}, p3);
    return {p1, p2, p3};
}

}  // namespace stlcbf
