#include "sslvit/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "sslvit/error.hpp"

namespace sslvit {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

constexpr const char* kHeader = "epoch,step,loss_total,loss_bt,loss_dino,ms";

constexpr const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                   "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

LossSeries parse_loss_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open loss csv " + path);
    std::string line;
    if (!std::getline(in, line) || split_csv_line(line) != split_csv_line(kHeader)) {
        throw ParseError("loss csv " + path + " has an unexpected header", 0);
    }
    LossSeries series;
    series.name = std::filesystem::path(path).stem().string();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 6) {
            throw ParseError("loss csv " + path + " line " + std::to_string(lineno) +
                                 " has the wrong field count",
                             lineno);
        }
        try {
            LossRecord r;
            r.epoch = std::stoul(fields[0]);
            r.step = std::stoul(fields[1]);
            r.loss_total = std::stof(fields[2]);
            if (!fields[3].empty()) r.loss_bt = std::stof(fields[3]);
            if (!fields[4].empty()) r.loss_dino = std::stof(fields[4]);
            r.ms = std::stoll(fields[5]);
            series.rows.push_back(r);
        } catch (const std::exception&) {
            throw ParseError("loss csv " + path + " line " + std::to_string(lineno) +
                                 " is malformed",
                             lineno);
        }
    }
    if (series.rows.empty()) {
        throw Error("loss csv " + path + " contains no data rows");
    }
    return series;
}

std::string render_loss_svg(const std::vector<LossSeries>& series) {
    if (series.empty()) throw ParamError("render_loss_svg: no series");

    // per-epoch means of the total loss
    struct Curve {
        std::string name;
        std::vector<std::pair<double, double>> points;  // (epoch, mean loss)
    };
    std::vector<Curve> curves;
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const LossSeries& s : series) {
        std::map<std::size_t, std::pair<double, std::size_t>> acc;
        for (const LossRecord& r : s.rows) {
            auto& slot = acc[r.epoch];
            slot.first += double(r.loss_total);
            slot.second += 1;
        }
        Curve c;
        c.name = s.name;
        for (const auto& [epoch, sum_count] : acc) {
            double mean = sum_count.first / double(sum_count.second);
            c.points.emplace_back(double(epoch), mean);
            min_x = std::min(min_x, double(epoch));
            max_x = std::max(max_x, double(epoch));
            min_y = std::min(min_y, mean);
            max_y = std::max(max_y, mean);
        }
        curves.push_back(std::move(c));
    }
    if (max_x - min_x < 1e-12) {
        min_x -= 0.5;
        max_x += 0.5;
    }
    if (max_y - min_y < 1e-12) {
        min_y -= 0.5;
        max_y += 0.5;
    }

    const double width = 800, height = 500;
    const double ml = 70, mr = 180, mt = 30, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double x) { return ml + (x - min_x) / (max_x - min_x) * pw; };
    auto sy = [&](double y) { return mt + (1.0 - (y - min_y) / (max_y - min_y)) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"14\">epoch</text>\n";
    svg << "<text x=\"18\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 18 " << mt + ph / 2
        << ")\">mean loss</text>\n";
    svg << "<text x=\"" << ml << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(min_x) << "</text>\n";
    svg << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(max_x) << "</text>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << mt + ph + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(min_y) << "</text>\n";
    svg << "<text x=\"" << ml - 8 << "\" y=\"" << mt + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(max_y) << "</text>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t j = 0; j < curves[i].points.size(); ++j) {
            if (j) svg << " ";
            svg << fmt(sx(curves[i].points[j].first)) << "," << fmt(sy(curves[i].points[j].second));
        }
        svg << "\"/>\n";
        double ly = mt + 16 + 20 * double(i);
        svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << ml + pw + 36 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        svg << "<text x=\"" << ml + pw + 42 << "\" y=\"" << ly
            << "\" font-size=\"12\">" << curves[i].name << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace sslvit
