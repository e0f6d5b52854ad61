#include "fp3d/geometry.hpp"

#include <cstdio>

namespace fp3d {

void CanvasConfig::check() const
{
    if (width < 4 || height < 4)
        throw std::invalid_argument("canvas width and height must be >= 4, got " + to_string());
    if (layers < 1)
        throw std::invalid_argument("canvas needs at least one layer, got " + to_string());
    if (cell_count() > (1u << 24))
        throw std::invalid_argument("canvas " + to_string() + " is too large");
}

std::string CanvasConfig::to_string() const
{
    return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(layers);
}

CanvasConfig CanvasConfig::parse(const std::string &text)
{
    CanvasConfig cfg;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%dx%dx%d%n", &cfg.width, &cfg.height, &cfg.layers, &consumed) != 3 ||
        consumed != static_cast<int>(text.size()))
        throw std::invalid_argument("canvas must look like WxHxZ, got '" + text + "'");
    cfg.check();
    return cfg;
}

} // namespace fp3d
