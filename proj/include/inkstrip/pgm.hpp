#ifndef INKSTRIP_PGM_HPP
#define INKSTRIP_PGM_HPP

#include <cstdio>
#include <fstream>
#include <string>

#include "inkstrip/errors.hpp"
#include "inkstrip/image.hpp"

namespace inkstrip {

namespace detail {

// Skips whitespace and '#' comment lines, then parses one unsigned decimal.
inline long pgm_token(std::istream& in, const std::string& path) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch))
        throw PgmError(PgmError::Kind::BadHeader, "pgm_read: malformed header in " + path);
    long value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > 1'000'000'000)
            throw PgmError(PgmError::Kind::BadHeader, "pgm_read: header value out of range in " + path);
        ch = in.get();
    }
    if (ch != EOF) in.unget();
    return value;
}

}  // namespace detail

/// Reads a binary PGM ("P5", maxval 255). Comment lines are tolerated.
inline GrayImage pgm_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("pgm_read: cannot open " + path);
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '5')
        throw PgmError(PgmError::Kind::BadMagic, "pgm_read: unsupported format (want P5) in " + path);
    const long w = detail::pgm_token(in, path);
    const long h = detail::pgm_token(in, path);
    const long maxval = detail::pgm_token(in, path);
    if (w < 1 || h < 1 || w * h > (1L << 30))
        throw PgmError(PgmError::Kind::BadHeader, "pgm_read: bad dimensions in " + path);
    if (maxval != 255)
        throw PgmError(PgmError::Kind::BadMaxval, "pgm_read: maxval must be 255 in " + path);
    // exactly one whitespace byte separates header and payload
    int sep = in.get();
    if (sep == EOF || !std::isspace(sep))
        throw PgmError(PgmError::Kind::BadHeader, "pgm_read: missing header terminator in " + path);
    GrayImage img(static_cast<int>(h), static_cast<int>(w));
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.data.size())
        throw PgmError(PgmError::Kind::Truncated, "pgm_read: truncated payload in " + path);
    return img;
}

/// Writes binary PGM with the exact header `P5\n<w> <h>\n255\n`. No comments.
inline void pgm_write(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("pgm_write: cannot open " + path);
    out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out)
        throw IoError("pgm_write: write failed for " + path);
}

}  // namespace inkstrip

#endif
