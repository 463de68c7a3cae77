#include "app.hpp"

int main(int argc, char** argv) { return kamq::app::run(argc, argv); }
