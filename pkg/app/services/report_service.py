# app/services/report_service.py
# Saídas tabulares (CSV/JSON com cabeçalho de metadados) e resumo de validação
# em Markdown/HTML renderizado por Jinja2.

import csv
import io
import json
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import markdown
from jinja2 import Environment, FileSystemLoader, select_autoescape

from app import __version__
from app.core.logs import log

FORMATOS = ("csv", "json")


def _formatar(valor: Any) -> str:
    """Floats com repr (ida e volta exata); o resto como texto."""
    if isinstance(valor, bool):
        return "true" if valor else "false"
    if isinstance(valor, float):
        return repr(valor)
    return str(valor)


def _interpretar(texto: str) -> Any:
    for conversor in (int, float):
        try:
            return conversor(texto)
        except ValueError:
            continue
    return texto


def _json_padrao(valor: Any) -> Any:
    # numpy e enums chegam aqui
    if hasattr(valor, "item"):
        return valor.item()
    if hasattr(valor, "value"):
        return valor.value
    if hasattr(valor, "tolist"):
        return valor.tolist()
    raise TypeError(f"Tipo não serializável: {type(valor)}")


class ReportService:
    """
    Serviço de saídas da CLI.

    CSV: linhas '# chave: valor' (valores não textuais em JSON), uma linha de
    cabeçalho, separador ',', decimal '.', fim de linha '\\n'. Nada dependente
    de relógio entra no arquivo, então execuções iguais geram bytes iguais.
    """

    def __init__(self, template_dir: Optional[str] = None):
        template_dir = template_dir or os.path.join(os.path.dirname(__file__), "..", "templates")
        self.env = Environment(
            loader=FileSystemLoader(template_dir),
            autoescape=select_autoescape(["html", "xml"]),
            trim_blocks=True,
            lstrip_blocks=True,
        )
        self.env.filters["num"] = lambda v, casas=4: "—" if v is None else f"{v:.{casas}g}"

    # --- Tabelas ---

    def metadata_lines(self, metadata: Dict[str, Any]) -> List[str]:
        linhas = [f"# rabivv {__version__}"]
        for chave, valor in metadata.items():
            texto = valor if isinstance(valor, str) else json.dumps(valor, sort_keys=True, default=_json_padrao)
            linhas.append(f"# {chave}: {texto}")
        return linhas

    def render_table(self, columns: Sequence[str], rows: Sequence[Sequence[Any]],
                     metadata: Dict[str, Any], formato: str = "csv") -> str:
        formato = formato.lower()
        if formato not in FORMATOS:
            raise ValueError(f"Formato não suportado: {formato}")

        if formato == "json":
            documento = {
                "metadata": {"rabivv": __version__, **metadata},
                "columns": list(columns),
                "rows": [list(r) for r in rows],
            }
            return json.dumps(documento, sort_keys=True, indent=1, default=_json_padrao) + "\n"

        buffer = io.StringIO()
        for linha in self.metadata_lines(metadata):
            buffer.write(linha + "\n")
        escritor = csv.writer(buffer, lineterminator="\n")
        escritor.writerow(columns)
        for row in rows:
            escritor.writerow([_formatar(v) for v in row])
        return buffer.getvalue()

    def write_table(self, path: Optional[str], columns: Sequence[str], rows: Sequence[Sequence[Any]],
                    metadata: Dict[str, Any], formato: str = "csv") -> str:
        """Grava a tabela em path (ou só devolve o texto se path for None)."""
        conteudo = self.render_table(columns, rows, metadata, formato)
        if path:
            pasta = os.path.dirname(path)
            if pasta:
                os.makedirs(pasta, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(conteudo)
            log("ReportService", f"{len(rows)} linhas gravadas em {path}", "DEBUG")
        return conteudo

    def parse_table(self, conteudo: str) -> Tuple[Dict[str, Any], List[str], List[List[Any]]]:
        """Lê de volta um texto CSV ou JSON produzido por render_table."""
        if conteudo.lstrip().startswith("{"):
            documento = json.loads(conteudo)
            return documento["metadata"], documento["columns"], documento["rows"]

        metadata: Dict[str, Any] = {}
        corpo: List[str] = []
        for linha in conteudo.splitlines():
            if linha.startswith("# rabivv "):
                metadata["rabivv"] = linha[len("# rabivv "):]
            elif linha.startswith("# "):
                chave, _, valor = linha[2:].partition(": ")
                try:
                    metadata[chave] = json.loads(valor)
                except json.JSONDecodeError:
                    metadata[chave] = valor
            elif linha:
                corpo.append(linha)
        leitor = csv.reader(corpo)
        columns = next(leitor)
        rows = [[_interpretar(v) for v in r] for r in leitor]
        return metadata, columns, rows

    def read_table(self, path: str) -> Tuple[Dict[str, Any], List[str], List[List[Any]]]:
        with open(path, "r", encoding="utf-8") as f:
            return self.parse_table(f.read())

    # --- Resumo de validação ---

    def render_validation_summary(self, contexto: Dict[str, Any]) -> str:
        template = self.env.get_template("resumo_validacao.md.j2")
        return template.render(versao=__version__, **contexto)

    def markdown_to_html(self, texto_md: str) -> str:
        corpo = markdown.markdown(texto_md, extensions=["tables", "fenced_code"])
        return f"<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>RabiVV</title></head>\n<body>\n{corpo}\n</body></html>\n"

    def write_validation_report(self, output_dir: str, contexto: Dict[str, Any]) -> Dict[str, str]:
        os.makedirs(output_dir, exist_ok=True)
        texto_md = self.render_validation_summary(contexto)
        caminhos = {
            "markdown": os.path.join(output_dir, "resumo_validacao.md"),
            "html": os.path.join(output_dir, "resumo_validacao.html"),
        }
        with open(caminhos["markdown"], "w", encoding="utf-8") as f:
            f.write(texto_md)
        with open(caminhos["html"], "w", encoding="utf-8") as f:
            f.write(self.markdown_to_html(texto_md))
        log("ReportService", f"Resumo de validação gravado em {output_dir}")
        return caminhos
