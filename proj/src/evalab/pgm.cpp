#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "star/evalab.hpp"

namespace star::evalab {
namespace {

std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

std::size_t parse_count(const std::string& tok, const std::string& path) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed PGM header");
    }
}

}  // namespace

Image read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    const std::string magic = next_token(in);
    if (magic != "P2" && magic != "P5") throw std::runtime_error(path + ": not a PGM file");
    Image img;
    img.cols = parse_count(next_token(in), path);
    img.rows = parse_count(next_token(in), path);
    const std::size_t maxval = parse_count(next_token(in), path);
    if (maxval > 65535) throw std::runtime_error(path + ": maxval too large");
    img.px.resize(img.rows * img.cols);
    if (magic == "P2") {
        for (auto& v : img.px) {
            const std::string tok = next_token(in);
            if (tok.empty()) throw std::runtime_error(path + ": truncated pixel data");
            v = static_cast<double>(std::stol(tok));
        }
    } else {
        const std::size_t bytes = maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(img.px.size() * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw std::runtime_error(path + ": truncated pixel data");
        for (std::size_t i = 0; i < img.px.size(); ++i)
            img.px[i] = bytes == 1 ? raw[i] : raw[2 * i] * 256.0 + raw[2 * i + 1];
    }
    return img;
}

void write_pgm(const std::string& path, const Image& img, const std::string& comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot write");
    out << "P5\n";
    if (!comment.empty()) out << "# " << comment << "\n";
    out << img.cols << ' ' << img.rows << "\n255\n";
    std::vector<unsigned char> raw(img.px.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<unsigned char>(std::clamp(std::lround(img.px[i]), 0L, 255L));
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace star::evalab
