#ifndef LSTMVIZ_TOOLS_SVG_HPP
#define LSTMVIZ_TOOLS_SVG_HPP

#include <string>

#include "lstmviz/evaluation.hpp"
#include "lstmviz/salience.hpp"

namespace lstmviz::cli {

/// Input channels drawn as polylines over a background whose red intensity
/// follows the salience of each timestep (max over channels).
std::string salience_svg(const Matrix& x, const SalienceMap& map, const std::string& title);

/// True-class probability curve above a band coloured by the predicted class
/// at each timestep.
std::string temporal_svg(const TemporalScores& scores, const std::string& title);

/// Every technique's mean reduction against alpha on one shared y-scale.
std::string curves_svg(const ComparisonTable& table, const std::string& title);

/// Escapes &, <, >, " and ' for XML text and attributes.
std::string xml_escape(const std::string& text);

}  // namespace lstmviz::cli

#endif  // LSTMVIZ_TOOLS_SVG_HPP
