#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "inkstrip/image.hpp"
#include "inkstrip/pgm.hpp"
#include "inkstrip/rng.hpp"

using namespace inkstrip;

namespace {

GrayImage random_binary(Rng& rng, int h, int w, double black_prob = 0.3) {
    GrayImage img(h, w, 255);
    for (auto& p : img.data)
        if (rng.bernoulli(black_prob)) p = 0;
    return img;
}

GrayImage random_gray(Rng& rng, int h, int w) {
    GrayImage img(h, w);
    for (auto& p : img.data) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

std::set<std::size_t> black_set(const GrayImage& img) {
    std::set<std::size_t> s;
    for (std::size_t i = 0; i < img.data.size(); ++i)
        if (img.data[i] == 0) s.insert(i);
    return s;
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "inkstrip_imgcore_test";
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("binarize endpoints and boundary") {
    GrayImage img(1, 4);
    img.data = {0, 127, 128, 255};
    const GrayImage out = binarize(img);
    CHECK(out.data[0] == 0);
    CHECK(out.data[1] == 0);    // 127 < 128 -> black
    CHECK(out.data[2] == 255);  // 128 -> white
    CHECK(out.data[3] == 255);
}

TEST_CASE("binarize uniform-128 image goes white") {
    GrayImage img(4, 5, 128);
    const GrayImage out = binarize(img);
    for (auto p : out.data) CHECK(p == 255);
}

TEST_CASE("binarize is idempotent") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const GrayImage img = random_gray(rng, 8, 13);
        const GrayImage once = binarize(img);
        CHECK(binarize(once) == once);
    }
}

TEST_CASE("superimpose basics") {
    GrayImage clean(2, 2, 255);
    GrayImage art(2, 2, 255);
    clean.at(0, 0) = 0;
    art.at(0, 0) = 0;   // overlap: black under black stays black
    art.at(1, 1) = 0;
    const GrayImage dirty = superimpose(clean, art);
    CHECK(dirty.at(0, 0) == 0);
    CHECK(dirty.at(1, 1) == 0);
    CHECK(dirty.at(0, 1) == 255);

    const GrayImage white(2, 2, 255);
    CHECK(superimpose(clean, white) == clean);  // all-white artifact is identity

    CHECK_THROWS_AS(superimpose(clean, GrayImage(3, 2)), DimensionError);
}

TEST_CASE("superimpose is a lattice min: commutative, associative, idempotent") {
    Rng rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const GrayImage a = random_gray(rng, 6, 9);
        const GrayImage b = random_gray(rng, 6, 9);
        const GrayImage c = random_gray(rng, 6, 9);
        CHECK(superimpose(a, b) == superimpose(b, a));
        CHECK(superimpose(superimpose(a, b), c) == superimpose(a, superimpose(b, c)));
        CHECK(superimpose(a, a) == a);
    }
}

TEST_CASE("translate_and_crop identity and placement") {
    Rng rng(33);
    const GrayImage img = random_binary(rng, 5, 7);
    CHECK(translate_and_crop(img, 0, 0, 5, 7) == img);

    GrayImage dot(1, 1, 0);
    const GrayImage moved = translate_and_crop(dot, 2, 3, 4, 5);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 5; ++c)
            CHECK(moved.at(r, c) == ((r == 2 && c == 3) ? 0 : 255));
}

TEST_CASE("translate_and_crop fully off-canvas gives all-white") {
    Rng rng(44);
    const GrayImage img = random_binary(rng, 4, 6);
    const GrayImage out = translate_and_crop(img, 4, 0, 4, 6);  // dy == target_h
    for (auto p : out.data) CHECK(p == 255);
}

TEST_CASE("translate composition equals translating by the sum") {
    Rng rng(55);
    for (int trial = 0; trial < 20; ++trial) {
        const GrayImage img = random_binary(rng, 6, 8);
        const int dy1 = rng.uniform_int(0, 4), dx1 = rng.uniform_int(0, 4);
        const int dy2 = rng.uniform_int(0, 4), dx2 = rng.uniform_int(0, 4);
        const int big_h = 6 + 8, big_w = 8 + 8;  // roomy canvas, nothing clips
        const GrayImage twice = translate_and_crop(
            translate_and_crop(img, dy1, dx1, big_h, big_w), dy2, dx2, big_h, big_w);
        CHECK(twice == translate_and_crop(img, dy1 + dy2, dx1 + dx2, big_h, big_w));
    }
}

TEST_CASE("derive_mask truth table") {
    GrayImage clean(2, 2);
    GrayImage art(2, 2);
    // (x, x_art): (255,0) (0,0) (0,255) (255,255)
    clean.data = {255, 0, 0, 255};
    art.data = {0, 0, 255, 255};
    const SegMask mask = derive_mask(clean, art);
    CHECK(mask.data[0] == 0);    // artifact on background
    CHECK(mask.data[1] == 255);  // overlap protected as text
    CHECK(mask.data[2] == 255);
    CHECK(mask.data[3] == 255);
}

TEST_CASE("derive_mask rejects bad input") {
    GrayImage clean(2, 2, 255);
    GrayImage art(2, 3, 255);
    CHECK_THROWS_AS(derive_mask(clean, art), DimensionError);
    GrayImage gray(2, 2, 100);
    CHECK_THROWS_AS(derive_mask(clean, gray), DataError);
}

TEST_CASE("derive_mask of all-white artifact is all-255") {
    Rng rng(66);
    const GrayImage clean = random_binary(rng, 6, 9);
    const GrayImage white(6, 9, 255);
    const SegMask mask = derive_mask(clean, white);
    for (auto p : mask.data) CHECK(p == 255);
}

TEST_CASE("erase_with_mask identity and full erase") {
    Rng rng(77);
    const GrayImage dirty = random_binary(rng, 5, 8);
    CHECK(erase_with_mask(dirty, SegMask(5, 8, 255)) == dirty);
    const GrayImage wiped = erase_with_mask(dirty, SegMask(5, 8, 0));
    for (auto p : wiped.data) CHECK(p == 255);
    CHECK_THROWS_AS(erase_with_mask(dirty, SegMask(5, 9)), DimensionError);
}

TEST_CASE("round-trip: erase(superimpose(c,a), derive_mask(c,a)) == c over 1000 random pairs") {
    Rng rng(88);
    for (int trial = 0; trial < 1000; ++trial) {
        const int h = rng.uniform_int(1, 12), w = rng.uniform_int(1, 16);
        const GrayImage clean = random_binary(rng, h, w, 0.35);
        const GrayImage art = random_binary(rng, h, w, 0.25);
        const GrayImage dirty = superimpose(clean, art);
        const SegMask mask = derive_mask(clean, art);
        REQUIRE(erase_with_mask(dirty, mask) == clean);
    }
}

TEST_CASE("mask black set equals A minus A∩B") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const GrayImage clean = random_binary(rng, 7, 11, 0.4);
        const GrayImage art = random_binary(rng, 7, 11, 0.3);
        const SegMask mask = derive_mask(clean, art);
        const auto A = black_set(art);
        const auto B = black_set(clean);
        std::set<std::size_t> expect;
        for (std::size_t p : A)
            if (!B.count(p)) expect.insert(p);
        CHECK(black_set(mask) == expect);
    }
}

TEST_CASE("resize_nn identity, checkerboard upscale, halving") {
    GrayImage board(2, 2);
    board.data = {0, 255, 255, 0};
    CHECK(resize_nn(board, 2, 2) == board);

    const GrayImage up = resize_nn(board, 4, 4);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(up.at(r, c) == board.at(r / 2, c / 2));

    Rng rng(111);
    const GrayImage img = random_binary(rng, 32, 128);
    const GrayImage down = resize_nn(img, 16, 64);
    CHECK(down.height == 16);
    CHECK(down.width == 64);
    CHECK(is_binary(down));
}

TEST_CASE("place_on_canvas identity, corner, and range errors") {
    Rng rng(123);
    const GrayImage full = random_binary(rng, 32, 128);
    CHECK(place_on_canvas(full, 0, 0) == full);

    const GrayImage dot(1, 1, 0);
    const GrayImage placed = place_on_canvas(dot, 31, 127);
    CHECK(placed.at(31, 127) == 0);
    CHECK(count_black(placed) == 1);

    CHECK_THROWS_AS(place_on_canvas(dot, 0, 129), DimensionError);
    CHECK_THROWS_AS(place_on_canvas(GrayImage(33, 128), 0, 0), DimensionError);
}

TEST_CASE("pgm round-trip is bit exact") {
    Rng rng(321);
    const auto dir = temp_dir();
    const auto path = (dir / "roundtrip.pgm").string();
    GrayImage img(2, 3);
    img.data = {0, 10, 20, 255, 128, 7};
    pgm_write(img, path);
    CHECK(pgm_read(path) == img);

    // write-read-write must give identical bytes
    const auto path2 = (dir / "roundtrip2.pgm").string();
    pgm_write(pgm_read(path), path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
}

TEST_CASE("pgm read tolerates comments, rejects malformations distinctly") {
    const auto dir = temp_dir();

    const auto ok = (dir / "comment.pgm").string();
    {
        std::ofstream f(ok, std::ios::binary);
        f << "P5\n# a comment\n2 1\n255\n";
        f.put(0);
        f.put(char(255));
    }
    const GrayImage img = pgm_read(ok);
    CHECK(img.width == 2);
    CHECK(img.data[0] == 0);

    const auto ascii = (dir / "ascii.pgm").string();
    {
        std::ofstream f(ascii, std::ios::binary);
        f << "P2\n2 1\n255\n0 255\n";
    }
    CHECK_THROWS_WITH_AS(pgm_read(ascii), doctest::Contains("unsupported format"), PgmError);
    try {
        pgm_read(ascii);
    } catch (const PgmError& e) {
        CHECK(e.kind == PgmError::Kind::BadMagic);
    }

    const auto badmax = (dir / "badmax.pgm").string();
    {
        std::ofstream f(badmax, std::ios::binary);
        f << "P5\n2 1\n65535\n";
        f.put(0);
        f.put(0);
    }
    try {
        pgm_read(badmax);
        FAIL("expected PgmError");
    } catch (const PgmError& e) {
        CHECK(e.kind == PgmError::Kind::BadMaxval);
    }

    const auto trunc = (dir / "trunc.pgm").string();
    {
        std::ofstream f(trunc, std::ios::binary);
        f << "P5\n4 4\n255\n";
        f.put(0);  // 1 byte instead of 16
    }
    try {
        pgm_read(trunc);
        FAIL("expected PgmError");
    } catch (const PgmError& e) {
        CHECK(e.kind == PgmError::Kind::Truncated);
    }

    CHECK_THROWS_AS(pgm_read((dir / "missing.pgm").string()), IoError);
}
