#include "s4f/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace s4f {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

// Skips whitespace and '#' comments between header tokens.
void skip_separators(const std::string& buf, std::size_t& pos) {
    while (pos < buf.size()) {
        const char c = buf[pos];
        if (c == '#') {
            while (pos < buf.size() && buf[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
}

std::size_t parse_uint(const std::string& buf, std::size_t& pos,
                       const std::string& path) {
    skip_separators(buf, pos);
    if (pos >= buf.size() || buf[pos] < '0' || buf[pos] > '9')
        fail(path, "malformed netpbm header");
    std::size_t v = 0;
    while (pos < buf.size() && buf[pos] >= '0' && buf[pos] <= '9') {
        v = v * 10 + static_cast<std::size_t>(buf[pos] - '0');
        ++pos;
    }
    return v;
}

unsigned char quantize(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
}

}  // namespace

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(path, "cannot open temp file for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) fail(path, "short write");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        fail(path, "rename failed: " + ec.message());
    }
}

Image read_image(const std::string& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6'))
        fail(path, "not a binary PGM (P5) or PPM (P6) file");
    const bool color = buf[1] == '6';
    std::size_t pos = 2;
    const std::size_t width = parse_uint(buf, pos, path);
    const std::size_t height = parse_uint(buf, pos, path);
    const std::size_t maxval = parse_uint(buf, pos, path);
    if (width == 0 || height == 0) fail(path, "malformed netpbm header");
    if (maxval != 255) fail(path, "unsupported maxval (expected 255)");
    if (pos >= buf.size()) fail(path, "truncated payload");
    const char sep = buf[pos];
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
        fail(path, "malformed netpbm header");
    ++pos;  // single whitespace byte after maxval
    const std::size_t samples = width * height * (color ? 3 : 1);
    if (buf.size() - pos < samples) fail(path, "truncated payload");

    Image img;
    img.y = Tensor({height, width});
    const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data()) + pos;
    if (!color) {
        img.colorspace = ColorSpace::gray;
        for (std::size_t i = 0; i < height * width; ++i)
            img.y.data()[i] = bytes[i] / 255.0;
        return img;
    }
    img.colorspace = ColorSpace::ycbcr;
    img.cb = Tensor({height, width});
    img.cr = Tensor({height, width});
    for (std::size_t i = 0; i < height * width; ++i) {
        const double r = bytes[3 * i] / 255.0;
        const double g = bytes[3 * i + 1] / 255.0;
        const double b = bytes[3 * i + 2] / 255.0;
        img.y.data()[i] = 0.299 * r + 0.587 * g + 0.114 * b;
        img.cb.data()[i] = -0.168736 * r - 0.331264 * g + 0.5 * b + 0.5;
        img.cr.data()[i] = 0.5 * r - 0.418688 * g - 0.081312 * b + 0.5;
    }
    return img;
}

void write_image(const std::string& path, const Tensor& y, const Tensor* cb,
                 const Tensor* cr) {
    require(y.rank() == 2, "write_image: luminance must be [H,W]");
    require((cb == nullptr) == (cr == nullptr),
            "write_image: chroma planes must be supplied together");
    const std::size_t h = y.extent(0), w = y.extent(1);
    std::ostringstream out;
    if (!cb) {
        out << "P5\n" << w << ' ' << h << "\n255\n";
        for (std::size_t i = 0; i < h * w; ++i)
            out.put(static_cast<char>(quantize(y.data()[i])));
    } else {
        require(same_shape(y, *cb) && same_shape(y, *cr),
                "write_image: chroma extent mismatch");
        out << "P6\n" << w << ' ' << h << "\n255\n";
        for (std::size_t i = 0; i < h * w; ++i) {
            const double yy = y.data()[i];
            const double u = cb->data()[i] - 0.5;
            const double v = cr->data()[i] - 0.5;
            out.put(static_cast<char>(quantize(yy + 1.402 * v)));
            out.put(static_cast<char>(quantize(yy - 0.344136 * u - 0.714136 * v)));
            out.put(static_cast<char>(quantize(yy + 1.772 * u)));
        }
    }
    atomic_write_file(path, out.str());
}

}  // namespace s4f
